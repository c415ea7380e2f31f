//! JSON-lines-over-TCP bridge to an external segmentation model.
//!
//! Request:  `{"id","width","height","pixels_b64","prompt"}` with raw RGB8 pixels.
//! Response: `{"id","width","height","probmap_b64"}` with row-major
//! little-endian `f32` scores. One line each, one request in flight per
//! connection, ids strictly increasing.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::Mutex;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use servobench_core::ProbabilityMap;

use super::{ProviderError, SegProvider};
use crate::image::RgbImage;
use crate::world::Frame;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentationRequest {
    pub id: u64,
    pub width: usize,
    pub height: usize,
    pub pixels_b64: String,
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentationResponse {
    pub id: u64,
    pub width: usize,
    pub height: usize,
    pub probmap_b64: String,
}

fn protocol(msg: impl Into<String>) -> ProviderError {
    ProviderError::ProtocolError(msg.into())
}

pub fn encode_request(id: u64, image: &RgbImage, prompt: &str) -> String {
    serde_json::to_string(&SegmentationRequest {
        id,
        width: image.width(),
        height: image.height(),
        pixels_b64: B64.encode(image.as_bytes()),
        prompt: prompt.to_string(),
    })
    .expect("request serializes")
}

pub fn decode_request(line: &str) -> Result<(u64, RgbImage, String), ProviderError> {
    let r: SegmentationRequest = serde_json::from_str(line.trim_end()).map_err(|e| protocol(e.to_string()))?;
    let bytes = B64.decode(&r.pixels_b64).map_err(|e| protocol(e.to_string()))?;
    let img = RgbImage::from_raw(r.width, r.height, bytes)
        .ok_or_else(|| protocol("pixel payload length is not 3·W·H"))?;
    Ok((r.id, img, r.prompt))
}

pub fn encode_response(id: u64, map: &ProbabilityMap) -> String {
    let mut bytes = Vec::with_capacity(map.len() * 4);
    for s in map.scores() {
        bytes.extend_from_slice(&s.to_le_bytes());
    }
    serde_json::to_string(&SegmentationResponse {
        id,
        width: map.width(),
        height: map.height(),
        probmap_b64: B64.encode(bytes),
    })
    .expect("response serializes")
}

/// Parses and validates one response line against the request it answers.
pub fn decode_response(line: &str, expected_id: u64, width: usize, height: usize) -> Result<ProbabilityMap, ProviderError> {
    let r: SegmentationResponse = serde_json::from_str(line.trim_end()).map_err(|e| protocol(format!("malformed response: {e}")))?;
    if r.id != expected_id {
        return Err(protocol(format!("response id {} does not match request id {expected_id}", r.id)));
    }
    if (r.width, r.height) != (width, height) {
        return Err(ProviderError::DimensionMismatch {
            expected_w: width,
            expected_h: height,
            got_w: r.width,
            got_h: r.height,
        });
    }
    let bytes = B64.decode(&r.probmap_b64).map_err(|e| protocol(format!("bad base64: {e}")))?;
    if bytes.len() != 4 * width * height {
        return Err(protocol(format!("payload has {} bytes, expected {}", bytes.len(), 4 * width * height)));
    }
    let scores: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    if let Some((i, v)) = scores.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(protocol(format!("score {v} at index {i} is outside [0, 1]")));
    }
    ProbabilityMap::new(width, height, scores).map_err(|e| protocol(e.to_string()))
}

struct Connection {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

struct RemoteState {
    conn: Option<Connection>,
    next_id: u64,
}

/// Client for the wire protocol. Calls are serialized over one persistent
/// connection; a failed exchange reconnects and retries once.
pub struct RemoteProvider {
    addr: String,
    timeout: Duration,
    state: Mutex<RemoteState>,
}

enum Failure {
    Timeout(String),
    Io(String),
    Fatal(ProviderError),
}

impl RemoteProvider {
    pub fn new(addr: impl Into<String>) -> Self {
        Self::with_timeout(addr, DEFAULT_TIMEOUT)
    }

    pub fn with_timeout(addr: impl Into<String>, timeout: Duration) -> Self {
        Self {
            addr: addr.into(),
            timeout,
            state: Mutex::new(RemoteState { conn: None, next_id: 1 }),
        }
    }

    pub fn addr(&self) -> &str {
        &self.addr
    }

    fn connect(&self) -> Result<Connection, Failure> {
        let addrs = self
            .addr
            .to_socket_addrs()
            .map_err(|e| Failure::Io(format!("resolving {}: {e}", self.addr)))?;
        let mut last = Failure::Io(format!("{} resolved to no addresses", self.addr));
        for a in addrs {
            match TcpStream::connect_timeout(&a, self.timeout) {
                Ok(s) => {
                    let io = |e: io::Error| Failure::Io(e.to_string());
                    s.set_read_timeout(Some(self.timeout)).map_err(io)?;
                    s.set_write_timeout(Some(self.timeout)).map_err(io)?;
                    s.set_nodelay(true).ok();
                    let writer = s.try_clone().map_err(io)?;
                    return Ok(Connection {
                        reader: BufReader::new(s),
                        writer,
                    });
                }
                Err(e) => last = classify(e),
            }
        }
        Err(last)
    }

    fn exchange(&self, st: &mut RemoteState, image: &RgbImage, prompt: &str) -> Result<ProbabilityMap, Failure> {
        if st.conn.is_none() {
            st.conn = Some(self.connect()?);
        }
        let id = st.next_id;
        st.next_id += 1;
        let conn = st.conn.as_mut().expect("connected above");
        let mut line = encode_request(id, image, prompt);
        line.push('\n');
        conn.writer.write_all(line.as_bytes()).map_err(classify)?;
        conn.writer.flush().map_err(classify)?;
        let mut reply = String::new();
        let n = conn.reader.read_line(&mut reply).map_err(classify)?;
        if n == 0 {
            return Err(Failure::Io("connection closed by peer".into()));
        }
        decode_response(&reply, id, image.width(), image.height()).map_err(Failure::Fatal)
    }
}

fn classify(e: io::Error) -> Failure {
    match e.kind() {
        io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => Failure::Timeout(e.to_string()),
        _ => Failure::Io(e.to_string()),
    }
}

impl SegProvider for RemoteProvider {
    fn provide(&self, frame: &Frame, prompt: &str) -> Result<ProbabilityMap, ProviderError> {
        let mut st = self.state.lock().unwrap_or_else(|p| p.into_inner());
        let mut last = None;
        for _ in 0..2 {
            match self.exchange(&mut st, &frame.image, prompt) {
                Ok(m) => return Ok(m),
                Err(Failure::Fatal(e)) => {
                    // The stream may hold a stale reply; start clean next time.
                    st.conn = None;
                    return Err(e);
                }
                Err(f) => {
                    st.conn = None;
                    last = Some(f);
                }
            }
        }
        Err(match last {
            Some(Failure::Timeout(m)) => ProviderError::Timeout(format!("{}: {m}", self.addr)),
            Some(Failure::Io(m)) => ProviderError::ProviderUnavailable(format!("{}: {m}", self.addr)),
            _ => ProviderError::ProviderUnavailable(self.addr.clone()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn response_validation() {
        let m = ProbabilityMap::new(2, 1, vec![0.25, 1.0]).unwrap();
        let line = encode_response(7, &m);
        assert!(line.starts_with(r#"{"id":7,"width":2,"height":1,"probmap_b64":"#));
        assert_eq!(decode_response(&line, 7, 2, 1).unwrap(), m);
        assert!(matches!(decode_response(&line, 8, 2, 1), Err(ProviderError::ProtocolError(_))));
        assert!(matches!(decode_response(&line, 7, 1, 2), Err(ProviderError::DimensionMismatch { .. })));
        assert!(matches!(decode_response("{", 7, 2, 1), Err(ProviderError::ProtocolError(_))));
        let bad = format!(
            r#"{{"id":1,"width":1,"height":1,"probmap_b64":"{}"}}"#,
            B64.encode(1.5f32.to_le_bytes())
        );
        assert!(matches!(decode_response(&bad, 1, 1, 1), Err(ProviderError::ProtocolError(_))));
    }

    #[test]
    fn request_roundtrip() {
        let img = RgbImage::new(3, 2, [9, 8, 7]);
        let line = encode_request(3, &img, "red mug");
        assert!(line.starts_with(r#"{"id":3,"width":3,"height":2,"pixels_b64":"#));
        assert_eq!(decode_request(&line).unwrap(), (3, img, "red mug".to_string()));
    }
}
