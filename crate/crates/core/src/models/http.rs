//! JSON-over-HTTP model clients.
//!
//! Embedding:  `POST {"input": "<text>"}` → `{"vector": [..]}`
//! Generation: `POST {"prompt": "<text>", "max_tokens": N, "temperature": T}` → `{"text": "<completion>"}`

use std::sync::Arc;
use std::time::Duration;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use super::{
    finish_embedding, Embedder, EmbeddingVector, GenerationParams, Generator, InFlightLimit,
};
use crate::error::{Error, Result};

#[derive(Serialize)]
struct EmbedRequest<'a> {
    input: &'a str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    vector: Vec<f64>,
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    prompt: &'a str,
    max_tokens: usize,
    temperature: f64,
}

#[derive(Deserialize)]
struct GenerateResponse {
    text: String,
}

#[derive(Clone)]
struct Endpoint {
    url: String,
    api_key: Option<String>,
    agent: ureq::Agent,
    limit: Arc<InFlightLimit>,
}

impl Endpoint {
    fn new(url: String, api_key: Option<String>, max_in_flight: usize) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        Self {
            url,
            api_key,
            agent,
            limit: Arc::new(InFlightLimit::new(max_in_flight)),
        }
    }

    fn post<B: Serialize, R: DeserializeOwned>(&self, body: &B) -> Result<R> {
        let _permit = self.limit.acquire();
        let mut req = self.agent.post(&self.url);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let transport = |message: String| Error::Transport {
            endpoint: self.url.clone(),
            message,
        };
        let resp = match req.send_json(body) {
            Ok(r) => r,
            Err(ureq::Error::StatusCode(code)) if (400..500).contains(&code) => {
                return Err(Error::Configuration(format!(
                    "{} rejected request with {code}",
                    self.url
                )))
            }
            Err(e) => return Err(transport(e.to_string())),
        };
        resp.into_body()
            .read_json::<R>()
            .map_err(|e| transport(format!("bad response body: {e}")))
    }
}

pub struct HttpEmbedder {
    id: String,
    dim: usize,
    endpoint: Endpoint,
}

impl HttpEmbedder {
    pub fn new(
        id: impl Into<String>,
        url: impl Into<String>,
        api_key: Option<String>,
        dim: usize,
        max_in_flight: usize,
    ) -> Self {
        Self {
            id: id.into(),
            dim,
            endpoint: Endpoint::new(url.into(), api_key, max_in_flight),
        }
    }
}

impl Embedder for HttpEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        if text.trim().is_empty() {
            return Err(Error::Validation("cannot embed empty text".into()));
        }
        let resp: EmbedResponse = self.endpoint.post(&EmbedRequest { input: text })?;
        finish_embedding(resp.vector, self.dim, &self.endpoint.url)
    }
}

pub struct HttpGenerator {
    id: String,
    endpoint: Endpoint,
}

impl HttpGenerator {
    pub fn new(
        id: impl Into<String>,
        url: impl Into<String>,
        api_key: Option<String>,
        max_in_flight: usize,
    ) -> Self {
        Self {
            id: id.into(),
            endpoint: Endpoint::new(url.into(), api_key, max_in_flight),
        }
    }
}

impl Generator for HttpGenerator {
    fn id(&self) -> &str {
        &self.id
    }

    fn generate(&self, prompt: &str, params: &GenerationParams) -> Result<String> {
        params.validate()?;
        if prompt.trim().is_empty() {
            return Err(Error::Validation("empty prompt".into()));
        }
        let resp: GenerateResponse = self.endpoint.post(&GenerateRequest {
            prompt,
            max_tokens: params.max_tokens,
            temperature: params.temperature,
        })?;
        if resp.text.trim().is_empty() {
            return Err(Error::Generation(format!(
                "{} returned an empty completion",
                self.endpoint.url
            )));
        }
        Ok(resp.text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    /// One-shot HTTP server that records the request body and replies `body`.
    fn serve_once(status: u16, body: &'static str) -> (String, std::thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1", listener.local_addr().unwrap());
        let handle = std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut req = vec![0; len];
            reader.read_exact(&mut req).unwrap();
            write!(
                stream,
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
            String::from_utf8(req).unwrap()
        });
        (url, handle)
    }

    #[test]
    fn embed_wire_format() {
        let (url, h) = serve_once(200, r#"{"vector": [3.0, 4.0]}"#);
        let e = HttpEmbedder::new("remote", url, None, 2, 4);
        let v = e.embed("hello").unwrap();
        assert_eq!(v.values(), &[0.6, 0.8]);
        let sent: serde_json::Value = serde_json::from_str(&h.join().unwrap()).unwrap();
        assert_eq!(sent, serde_json::json!({"input": "hello"}));
    }

    #[test]
    fn embed_dimension_mismatch_is_configuration_error() {
        let (url, _h) = serve_once(200, r#"{"vector": [1.0, 0.0, 0.0]}"#);
        let e = HttpEmbedder::new("remote", url, None, 2, 4);
        assert!(matches!(e.embed("hello"), Err(Error::Configuration(_))));
    }

    #[test]
    fn generate_wire_format() {
        let (url, h) = serve_once(200, r#"{"text": "done."}"#);
        let g = HttpGenerator::new("remote", url, Some("k".into()), 4);
        let out = g
            .generate(
                "p",
                &GenerationParams {
                    max_tokens: 7,
                    temperature: 0.0,
                },
            )
            .unwrap();
        assert_eq!(out, "done.");
        let sent: serde_json::Value = serde_json::from_str(&h.join().unwrap()).unwrap();
        assert_eq!(
            sent,
            serde_json::json!({"prompt": "p", "max_tokens": 7, "temperature": 0.0})
        );
    }

    #[test]
    fn server_errors_are_retryable_and_empty_completion_is_not() {
        let (url, _h) = serve_once(503, r#"{}"#);
        let g = HttpGenerator::new("remote", url, None, 4);
        let err = g.generate("p", &GenerationParams::default()).unwrap_err();
        assert!(err.is_retryable(), "{err}");

        let (url, _h) = serve_once(200, r#"{"text": " "}"#);
        let g = HttpGenerator::new("remote", url, None, 4);
        let err = g.generate("p", &GenerationParams::default()).unwrap_err();
        assert!(matches!(err, Error::Generation(_)));
    }

    #[test]
    fn unreachable_endpoint_is_transport_error() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/", listener.local_addr().unwrap());
        drop(listener);
        let e = HttpEmbedder::new("remote", url, None, 2, 4);
        assert!(e.embed("x").unwrap_err().is_retryable());
    }
}
