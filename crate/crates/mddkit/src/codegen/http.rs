//! HTTP backend: posts the rendered prompt to a chat-completions style
//! endpoint with retries and a hard timeout, then extracts fenced code
//! blocks from the reply into files.

use super::{BackendConfig, CodegenError, PromptBundle};
use serde::Deserialize;
use serde_json::json;
use std::time::Duration;

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Debug, Deserialize)]
struct ChoiceMessage {
    content: String,
}

pub fn generate_over_http(
    bundle: &PromptBundle,
    config: &BackendConfig,
) -> Result<Vec<(String, String)>, CodegenError> {
    let endpoint = config.endpoint.as_deref().expect("validated");
    let token_env = config.token_env.as_deref().expect("validated");
    let token =
        std::env::var(token_env).map_err(|_| CodegenError::MissingToken(token_env.to_string()))?;

    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(config.timeout_secs))
        .build()
        .map_err(|e| CodegenError::Network { attempts: 0, message: e.to_string() })?;

    let body = json!({
        "model": config.model,
        "messages": [{ "role": "user", "content": bundle.render() }],
    });

    let attempts = config.max_retries + 1;
    let mut last_error = String::new();
    for attempt in 0..attempts {
        if attempt > 0 {
            // Exponential backoff between retries.
            std::thread::sleep(Duration::from_millis(100 << (attempt - 1)));
        }
        match client.post(endpoint).bearer_auth(&token).json(&body).send() {
            Ok(response) => {
                let status = response.status();
                if status.is_server_error() {
                    last_error = format!("server returned {status}");
                    continue;
                }
                if !status.is_success() {
                    return Err(CodegenError::Network {
                        attempts: attempt + 1,
                        message: format!("server returned {status}"),
                    });
                }
                let parsed: ChatResponse = response.json().map_err(|e| CodegenError::Network {
                    attempts: attempt + 1,
                    message: format!("malformed response body: {e}"),
                })?;
                let content = parsed
                    .choices
                    .first()
                    .map(|c| c.message.content.as_str())
                    .unwrap_or_default();
                if content.trim().is_empty() {
                    return Err(CodegenError::EmptyResponse);
                }
                let files = extract_fenced_files(content);
                if files.is_empty() {
                    return Err(CodegenError::NoCodeFences);
                }
                return Ok(files);
            }
            Err(e) => {
                last_error = e.to_string();
            }
        }
    }
    Err(CodegenError::Network { attempts, message: last_error })
}

/// Extracts fenced code blocks into `(path, content)` files. A fence whose
/// preceding non-empty line is `// file: <path>` or `# file: <path>` is
/// named by it; unnamed fences become `generated_<n>`.
pub fn extract_fenced_files(text: &str) -> Vec<(String, String)> {
    let mut files = Vec::new();
    let mut pending_name: Option<String> = None;
    let mut current: Option<(String, String)> = None;
    let mut unnamed = 0usize;

    for line in text.lines() {
        if let Some((name, content)) = current.as_mut() {
            if line.trim_start().starts_with("```") {
                files.push((name.clone(), content.clone()));
                current = None;
            } else {
                content.push_str(line);
                content.push('\n');
            }
            continue;
        }
        if line.trim_start().starts_with("```") {
            let name = pending_name.take().unwrap_or_else(|| {
                unnamed += 1;
                format!("generated_{unnamed}")
            });
            current = Some((name, String::new()));
            continue;
        }
        let trimmed = line.trim();
        let file_hint = trimmed
            .strip_prefix("// file:")
            .or_else(|| trimmed.strip_prefix("# file:"))
            .map(str::trim);
        match file_hint {
            Some(path) if !path.is_empty() => pending_name = Some(path.to_string()),
            _ if !trimmed.is_empty() => pending_name = None,
            _ => {}
        }
    }
    files
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codegen::{generate, BackendConfig, PromptBundle};
    use std::io::{Read, Write};
    use std::net::TcpListener;

    fn bundle() -> PromptBundle {
        PromptBundle {
            structural_text: "class A".into(),
            behavioral_text: "start".into(),
            constraints_text: "context A inv x: true".into(),
            ontology_text: "concept C {\n}".into(),
            target_language: "sim".into(),
            instruction_preamble: "preamble".into(),
        }
    }

    #[test]
    fn named_fences_become_files() {
        let text = "Here is the code.\n\n// file: operator.x\n```java\nclass Operator {}\n```\n\n# file: mcc.x\n```python\nclass Mcc: pass\n```\n";
        let files = extract_fenced_files(text);
        assert_eq!(files.len(), 2);
        assert_eq!(files[0].0, "operator.x");
        assert_eq!(files[0].1, "class Operator {}\n");
        assert_eq!(files[1].0, "mcc.x");
    }

    #[test]
    fn unnamed_fences_get_generated_names() {
        let text = "```\nalpha\n```\nprose\n```\nbeta\n```\n";
        let files = extract_fenced_files(text);
        assert_eq!(files.len(), 2);
        assert_eq!(files[0].0, "generated_1");
        assert_eq!(files[1].0, "generated_2");
    }

    #[test]
    fn prose_between_hint_and_fence_cancels_the_hint() {
        let text = "// file: a.x\nsome prose\n```\nbody\n```\n";
        let files = extract_fenced_files(text);
        assert_eq!(files[0].0, "generated_1");
    }

    #[test]
    fn unreachable_endpoint_errors_after_retries() {
        // Port 1 on localhost refuses connections immediately.
        std::env::set_var("MDDKIT_TEST_TOKEN_A", "token");
        let mut config =
            BackendConfig::http("http://127.0.0.1:1/v1/chat", "test-model", "MDDKIT_TEST_TOKEN_A");
        config.max_retries = 2;
        config.timeout_secs = 2;
        let err = generate(&bundle(), &config).unwrap_err();
        match err {
            CodegenError::Network { attempts, .. } => assert_eq!(attempts, 3),
            other => panic!("expected network error, got {other:?}"),
        }
    }

    #[test]
    fn missing_token_env_is_an_error() {
        let config = BackendConfig::http("http://127.0.0.1:1/", "m", "MDDKIT_TEST_TOKEN_UNSET");
        let err = generate(&bundle(), &config).unwrap_err();
        assert!(matches!(err, CodegenError::MissingToken(_)));
    }

    #[test]
    fn canned_response_round_trips_over_real_socket() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let server = std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut buf = [0u8; 65536];
            let _ = stream.read(&mut buf);
            let content = "// file: operator.x\\n```\\nclass Operator {}\\n```\\n";
            let body = format!(
                "{{\"choices\":[{{\"message\":{{\"content\":\"{content}\"}}}}]}}"
            );
            let response = format!(
                "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(response.as_bytes()).unwrap();
        });

        std::env::set_var("MDDKIT_TEST_TOKEN_B", "token");
        let config = BackendConfig::http(
            format!("http://{addr}/v1/chat"),
            "test-model",
            "MDDKIT_TEST_TOKEN_B",
        );
        let artifact = generate(&bundle(), &config).unwrap();
        server.join().unwrap();
        assert_eq!(artifact.files.len(), 1);
        assert_eq!(artifact.files[0].0, "operator.x");
        assert_eq!(artifact.files[0].1, "class Operator {}\n");
    }
}
