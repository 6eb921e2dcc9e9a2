//! Code-generation orchestration: assemble the four model layers into one
//! prompt, dispatch it to a backend (HTTP chat endpoint or the deterministic
//! offline template expander), and audit the returned files.

mod http;
mod templates;

pub use http::extract_fenced_files;
pub use templates::expand_templates;

use crate::constraint::{self, CodeQualityRuleSet};
use crate::diag::{ParseDiagnostic, Violation};
use crate::ontology;
use crate::puml::{self, DiagramKind, SourceUnit};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::{Component, Path, PathBuf};
use thiserror::Error;

/// The four model layers as text, in the fixed order they are rendered into
/// the prompt: structural, behavioral, constraints, ontology.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PromptBundle {
    pub structural_text: String,
    pub behavioral_text: String,
    pub constraints_text: String,
    pub ontology_text: String,
    pub target_language: String,
    pub instruction_preamble: String,
}

pub const DEFAULT_PREAMBLE: &str = "\
You are given a complete software model in four layers: structural \
(class and state diagrams), behavioral (activity diagram), construction \
constraints, and a communication ontology. Generate a complete, runnable \
multi-agent program in the requested target language. Honor every \
constraint and schema. Emit one code block per file, each preceded by a \
line `// file: <relative path>` naming it.";

impl PromptBundle {
    /// Renders the prompt: preamble, then the four labeled layers in fixed
    /// order, then the target-language instruction. Identical inputs yield
    /// byte-identical text.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.instruction_preamble);
        out.push_str("\n\n");
        for (label, body) in [
            ("STRUCTURAL MODEL (PlantUML)", &self.structural_text),
            ("BEHAVIORAL MODEL (PlantUML)", &self.behavioral_text),
            ("CONSTRUCTION CONSTRAINTS (OCL)", &self.constraints_text),
            ("COMMUNICATION ONTOLOGY", &self.ontology_text),
        ] {
            out.push_str(&format!("=== {label} ===\n{body}\n"));
        }
        out.push_str(&format!("=== TARGET ===\nGenerate the code in: {}\n", self.target_language));
        out
    }

    /// Stable hex digest of the rendered prompt.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.render().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    HttpLlm,
    OfflineTemplate,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendKind::HttpLlm => f.write_str("http_llm"),
            BackendKind::OfflineTemplate => f.write_str("offline_template"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Chat-completions style endpoint; http_llm only.
    pub endpoint: Option<String>,
    /// Model identifier passed through in the request body.
    pub model: String,
    /// Name of the environment variable holding the auth token. The token
    /// value itself is never stored or logged.
    pub token_env: Option<String>,
    pub timeout_secs: u64,
    pub max_retries: u32,
}

impl BackendConfig {
    pub fn offline() -> Self {
        Self {
            kind: BackendKind::OfflineTemplate,
            endpoint: None,
            model: "offline-template".to_string(),
            token_env: None,
            timeout_secs: 120,
            max_retries: 2,
        }
    }

    pub fn http(endpoint: impl Into<String>, model: impl Into<String>, token_env: impl Into<String>) -> Self {
        Self {
            kind: BackendKind::HttpLlm,
            endpoint: Some(endpoint.into()),
            model: model.into(),
            token_env: Some(token_env.into()),
            timeout_secs: 120,
            max_retries: 2,
        }
    }

    pub fn validate(&self) -> Result<(), CodegenError> {
        match self.kind {
            BackendKind::HttpLlm => {
                if self.endpoint.is_none() {
                    return Err(CodegenError::InvalidConfig("http_llm requires an endpoint".into()));
                }
                if self.token_env.is_none() {
                    return Err(CodegenError::InvalidConfig(
                        "http_llm requires the name of a token environment variable".into(),
                    ));
                }
            }
            BackendKind::OfflineTemplate => {}
        }
        Ok(())
    }
}

/// Files produced by one generation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedArtifact {
    pub files: Vec<(String, String)>,
    pub backend: BackendKind,
    pub prompt_digest: String,
    pub timestamp: String,
}

impl GeneratedArtifact {
    pub fn new(
        files: Vec<(String, String)>,
        backend: BackendKind,
        prompt_digest: String,
    ) -> Result<Self, CodegenError> {
        if files.is_empty() {
            return Err(CodegenError::EmptyArtifact);
        }
        for (path, _) in &files {
            let p = Path::new(path);
            let traversal = p.components().any(|c| {
                matches!(c, Component::ParentDir | Component::RootDir | Component::Prefix(_))
            });
            if traversal || path.is_empty() {
                return Err(CodegenError::UnsafePath(path.clone()));
            }
        }
        Ok(Self {
            files,
            backend,
            prompt_digest,
            timestamp: chrono::Utc::now().to_rfc3339(),
        })
    }

    pub fn file(&self, path: &str) -> Option<&str> {
        self.files.iter().find(|(p, _)| p == path).map(|(_, c)| c.as_str())
    }

    /// Writes the files under `out_dir` plus a `manifest.json` describing the
    /// run. Returns the paths written.
    pub fn write_to(&self, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, CodegenError> {
        let out_dir = out_dir.as_ref();
        std::fs::create_dir_all(out_dir).map_err(|e| CodegenError::Io {
            path: out_dir.display().to_string(),
            source: e,
        })?;
        let mut written = Vec::new();
        for (rel, content) in &self.files {
            let path = out_dir.join(rel);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| CodegenError::Io {
                    path: parent.display().to_string(),
                    source: e,
                })?;
            }
            std::fs::write(&path, content).map_err(|e| CodegenError::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            written.push(path);
        }
        let manifest = self.manifest_json();
        let manifest_path = out_dir.join("manifest.json");
        std::fs::write(&manifest_path, manifest).map_err(|e| CodegenError::Io {
            path: manifest_path.display().to_string(),
            source: e,
        })?;
        written.push(manifest_path);
        Ok(written)
    }

    pub fn manifest_json(&self) -> String {
        #[derive(Serialize)]
        struct FileEntry<'a> {
            path: &'a str,
            bytes: usize,
            sha256: String,
        }
        #[derive(Serialize)]
        struct Manifest<'a> {
            backend: BackendKind,
            prompt_digest: &'a str,
            timestamp: &'a str,
            files: Vec<FileEntry<'a>>,
        }
        let manifest = Manifest {
            backend: self.backend,
            prompt_digest: &self.prompt_digest,
            timestamp: &self.timestamp,
            files: self
                .files
                .iter()
                .map(|(path, content)| FileEntry {
                    path,
                    bytes: content.len(),
                    sha256: Sha256::digest(content.as_bytes())
                        .iter()
                        .map(|b| format!("{b:02x}"))
                        .collect(),
                })
                .collect(),
        };
        let mut out = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        out.push('\n');
        out
    }
}

#[derive(Debug, Error)]
pub enum CodegenError {
    #[error("invalid {layer} layer:\n{}", render_diags(.diagnostics))]
    InvalidLayer { layer: &'static str, diagnostics: Vec<ParseDiagnostic> },
    #[error("invalid {layer} layer: {message}")]
    BrokenLayer { layer: &'static str, message: String },
    #[error("invalid backend config: {0}")]
    InvalidConfig(String),
    #[error("environment variable `{0}` is not set")]
    MissingToken(String),
    #[error("network failure after {attempts} attempts: {message}")]
    Network { attempts: u32, message: String },
    #[error("backend returned an empty response")]
    EmptyResponse,
    #[error("no code fences found in the backend response")]
    NoCodeFences,
    #[error("generated file path `{0}` is not a safe relative path")]
    UnsafePath(String),
    #[error("artifact contains no files")]
    EmptyArtifact,
    #[error("failed to write `{path}`")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn render_diags(diags: &[ParseDiagnostic]) -> String {
    diags.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n")
}

/// Raw layer texts as loaded from disk, before validation.
#[derive(Debug, Clone)]
pub struct LayerTexts {
    /// `(path label, text)` of every model diagram file.
    pub model_sources: Vec<(String, String)>,
    pub constraints_text: String,
    pub ontology_text: String,
}

impl LayerTexts {
    pub fn load(
        model_paths: &[impl AsRef<Path>],
        constraints_path: impl AsRef<Path>,
        ontology_paths: &[impl AsRef<Path>],
    ) -> Result<Self, CodegenError> {
        let read = |path: &Path| {
            std::fs::read_to_string(path).map_err(|e| CodegenError::Io {
                path: path.display().to_string(),
                source: e,
            })
        };
        let mut model_sources = Vec::new();
        for path in model_paths {
            let path = path.as_ref();
            model_sources.push((path.display().to_string(), read(path)?));
        }
        let constraints_text = read(constraints_path.as_ref())?;
        let mut ontology_text = String::new();
        for path in ontology_paths {
            let text = read(path.as_ref())?;
            if !ontology_text.is_empty() {
                ontology_text.push('\n');
            }
            ontology_text.push_str(&text);
        }
        Ok(Self { model_sources, constraints_text, ontology_text })
    }
}

/// Validates all four layers and assembles the prompt bundle. Fails fast on
/// the first invalid layer: no prompt is built from a broken model.
pub fn assemble_prompt(
    layers: &LayerTexts,
    target_language: &str,
) -> Result<PromptBundle, CodegenError> {
    // Structural + behavioral: parse and validate the merged model.
    let mut units = Vec::new();
    for (path, text) in &layers.model_sources {
        let unit = SourceUnit::new(path.clone(), text.clone(), None)
            .map_err(|e| CodegenError::BrokenLayer { layer: "structural", message: e.to_string() })?;
        units.push(unit);
    }
    let (_, diagnostics) = puml::load_model_from_units(&units)
        .map_err(|e| CodegenError::BrokenLayer { layer: "structural", message: e.to_string() })?;
    let errors: Vec<ParseDiagnostic> =
        diagnostics.into_iter().filter(|d| d.is_error()).collect();
    if !errors.is_empty() {
        return Err(CodegenError::InvalidLayer { layer: "structural", diagnostics: errors });
    }

    let structural: Vec<&str> = units
        .iter()
        .filter(|u| matches!(u.kind, DiagramKind::ClassDiagram | DiagramKind::StateDiagram))
        .map(|u| u.text.as_str())
        .collect();
    let behavioral: Vec<&str> = units
        .iter()
        .filter(|u| u.kind == DiagramKind::ActivityDiagram)
        .map(|u| u.text.as_str())
        .collect();
    if structural.is_empty() {
        return Err(CodegenError::BrokenLayer {
            layer: "structural",
            message: "no class or state diagram among the model sources".into(),
        });
    }
    if behavioral.is_empty() {
        return Err(CodegenError::BrokenLayer {
            layer: "behavioral",
            message: "no activity diagram among the model sources".into(),
        });
    }

    if layers.constraints_text.trim().is_empty() {
        return Err(CodegenError::BrokenLayer {
            layer: "constraints",
            message: "constraints text is empty".into(),
        });
    }
    let (_, diags) = constraint::parse_constraints(&layers.constraints_text);
    let errors: Vec<ParseDiagnostic> = diags.into_iter().filter(|d| d.is_error()).collect();
    if !errors.is_empty() {
        return Err(CodegenError::InvalidLayer { layer: "constraints", diagnostics: errors });
    }

    if layers.ontology_text.trim().is_empty() {
        return Err(CodegenError::BrokenLayer {
            layer: "ontology",
            message: "ontology text is empty".into(),
        });
    }
    ontology::register_ontology(&layers.ontology_text)
        .map_err(|e| CodegenError::BrokenLayer { layer: "ontology", message: e.to_string() })?;

    Ok(PromptBundle {
        structural_text: structural.join("\n"),
        behavioral_text: behavioral.join("\n"),
        constraints_text: layers.constraints_text.clone(),
        ontology_text: layers.ontology_text.clone(),
        target_language: target_language.to_string(),
        instruction_preamble: DEFAULT_PREAMBLE.to_string(),
    })
}

/// Runs the configured backend over the bundle. The offline backend is a
/// pure function of the bundle and performs no I/O; the HTTP backend posts
/// the rendered prompt and extracts fenced code blocks from the reply.
pub fn generate(
    bundle: &PromptBundle,
    config: &BackendConfig,
) -> Result<GeneratedArtifact, CodegenError> {
    config.validate()?;
    match config.kind {
        BackendKind::OfflineTemplate => {
            let files = templates::expand_templates(bundle)?;
            GeneratedArtifact::new(files, BackendKind::OfflineTemplate, bundle.digest())
        }
        BackendKind::HttpLlm => {
            let files = http::generate_over_http(bundle, config)?;
            GeneratedArtifact::new(files, BackendKind::HttpLlm, bundle.digest())
        }
    }
}

/// Runs the code-quality rules over every file in the artifact.
pub fn audit_artifact(
    artifact: &GeneratedArtifact,
    rules: &CodeQualityRuleSet,
) -> Vec<Violation> {
    let mut violations = Vec::new();
    for (path, content) in &artifact.files {
        violations.extend(constraint::check_code_quality(path, content, rules));
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn fixture(rel: &str) -> PathBuf {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
    }

    pub(crate) fn fixture_layers() -> LayerTexts {
        LayerTexts::load(
            &[
                fixture("model/classes.puml"),
                fixture("model/uv_states.puml"),
                fixture("model/mission_activity.puml"),
            ],
            fixture("constraints/case_study.ocl"),
            &[fixture("ontology/case_study.onto"), fixture("ontology/discovery.onto")],
        )
        .unwrap()
    }

    #[test]
    fn prompt_contains_all_four_sections_in_order() {
        let bundle = assemble_prompt(&fixture_layers(), "java-agents").unwrap();
        let prompt = bundle.render();
        let positions: Vec<usize> = [
            "=== STRUCTURAL MODEL (PlantUML) ===",
            "=== BEHAVIORAL MODEL (PlantUML) ===",
            "=== CONSTRUCTION CONSTRAINTS (OCL) ===",
            "=== COMMUNICATION ONTOLOGY ===",
            "=== TARGET ===",
        ]
        .iter()
        .map(|s| prompt.find(s).unwrap_or_else(|| panic!("missing section {s}")))
        .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
        assert!(prompt.contains("java-agents"));
    }

    #[test]
    fn identical_inputs_give_identical_digests() {
        let a = assemble_prompt(&fixture_layers(), "java-agents").unwrap();
        let b = assemble_prompt(&fixture_layers(), "java-agents").unwrap();
        assert_eq!(a.digest(), b.digest());
    }

    #[test]
    fn digest_changes_with_any_layer() {
        let base = assemble_prompt(&fixture_layers(), "java-agents").unwrap();
        let retargeted = PromptBundle {
            target_language: "python-agents".to_string(),
            ..base.clone()
        };
        assert_ne!(base.digest(), retargeted.digest());
        let reconstrained = PromptBundle {
            constraints_text: format!("{}\n", base.constraints_text),
            ..base.clone()
        };
        assert_ne!(base.digest(), reconstrained.digest());
    }

    #[test]
    fn missing_constraints_is_an_invalid_layer() {
        let mut layers = fixture_layers();
        layers.constraints_text = String::new();
        let err = assemble_prompt(&layers, "java-agents").unwrap_err();
        assert!(matches!(err, CodegenError::BrokenLayer { layer: "constraints", .. }));
    }

    #[test]
    fn broken_constraint_syntax_names_the_layer() {
        let mut layers = fixture_layers();
        layers.constraints_text = "context UV inv oops: self.performance >=".to_string();
        let err = assemble_prompt(&layers, "java-agents").unwrap_err();
        assert!(matches!(err, CodegenError::InvalidLayer { layer: "constraints", .. }));
    }

    #[test]
    fn offline_backend_yields_one_file_per_class_plus_main() {
        let bundle = assemble_prompt(&fixture_layers(), "sim").unwrap();
        let artifact = generate(&bundle, &BackendConfig::offline()).unwrap();
        assert_eq!(artifact.files.len(), 8); // 7 agent classes + main
        assert!(artifact.file("main.sim").is_some());
        assert!(artifact.file("uvf_manager.sim").is_some());
    }

    #[test]
    fn offline_backend_is_byte_identical_across_runs() {
        let bundle = assemble_prompt(&fixture_layers(), "sim").unwrap();
        let a = generate(&bundle, &BackendConfig::offline()).unwrap();
        let b = generate(&bundle, &BackendConfig::offline()).unwrap();
        assert_eq!(a.files, b.files);
        assert_eq!(a.prompt_digest, b.prompt_digest);
    }

    #[test]
    fn offline_artifact_passes_default_quality_rules() {
        let bundle = assemble_prompt(&fixture_layers(), "sim").unwrap();
        let artifact = generate(&bundle, &BackendConfig::offline()).unwrap();
        let violations = audit_artifact(&artifact, &CodeQualityRuleSet::default());
        assert_eq!(violations, vec![]);
    }

    #[test]
    fn tab_indented_artifact_is_flagged() {
        let artifact = GeneratedArtifact::new(
            vec![("x.sim".to_string(), "fn f() {\n\tlog\n}\n".to_string())],
            BackendKind::OfflineTemplate,
            "digest".to_string(),
        )
        .unwrap();
        let violations = audit_artifact(&artifact, &CodeQualityRuleSet::default());
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].constraint_id, "indentation");
    }

    #[test]
    fn traversal_paths_are_rejected() {
        let err = GeneratedArtifact::new(
            vec![("../evil.sim".to_string(), String::new())],
            BackendKind::OfflineTemplate,
            "d".to_string(),
        )
        .unwrap_err();
        assert!(matches!(err, CodegenError::UnsafePath(_)));
    }

    #[test]
    fn artifact_writes_files_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let bundle = assemble_prompt(&fixture_layers(), "sim").unwrap();
        let artifact = generate(&bundle, &BackendConfig::offline()).unwrap();
        let written = artifact.write_to(dir.path()).unwrap();
        assert_eq!(written.len(), 9); // 8 files + manifest
        let manifest = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
        assert!(manifest.contains("offline_template"));
        assert!(manifest.contains(&artifact.prompt_digest));
    }
}
