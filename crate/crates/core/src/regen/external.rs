//! Out-of-process backends.
//!
//! Each request spawns the configured command. Its stdin receives one JSON
//! header line (`{"op": "encode"|"generate"|"features", "id": str}`)
//! followed by a binary tensor; it answers with a single tensor on stdout.
//!
//! Tensor layout (little-endian): `u32 rank`, `u32 dims[rank]`,
//! `f32 data[product(dims)]`. Images travel as `[height, width, 3]`,
//! latents and feature vectors as `[n]`.

use std::io::{Read, Write};
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use super::{EncoderBackend, GeneratorBackend, LatentVector, PerceptualBackend};
use crate::error::{Error, Result};
use crate::fsio;
use crate::imaging::FaceImage;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<u32>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<u32>, data: Vec<f32>) -> Result<Self> {
        let expected: usize = dims.iter().map(|&d| d as usize).product();
        if expected != data.len() {
            return Err(Error::Backend(format!(
                "tensor dims {dims:?} need {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { dims, data })
    }

    pub fn vector(values: &[f64]) -> Tensor {
        Tensor {
            dims: vec![values.len() as u32],
            data: values.iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn image(image: &FaceImage) -> Tensor {
        Tensor {
            dims: vec![image.height() as u32, image.width() as u32, 3],
            data: image.data().iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }

    /// Interprets a `[height, width, 3]` tensor as an image, clamping values into [0, 1].
    pub fn to_image(&self) -> Result<FaceImage> {
        match self.dims[..] {
            [h, w, 3] => FaceImage::from_clamped(w as usize, h as usize, self.to_f64()),
            _ => Err(Error::Backend(format!(
                "expected [h, w, 3] image tensor, got {:?}",
                self.dims
            ))),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 4 * self.dims.len() + 4 * self.data.len());
        out.extend((self.dims.len() as u32).to_le_bytes());
        for d in &self.dims {
            out.extend(d.to_le_bytes());
        }
        for v in &self.data {
            out.extend(v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Tensor> {
        let word = |i: usize| -> Result<[u8; 4]> {
            bytes
                .get(i * 4..i * 4 + 4)
                .map(|b| [b[0], b[1], b[2], b[3]])
                .ok_or_else(|| Error::Backend("truncated tensor".into()))
        };
        let rank = u32::from_le_bytes(word(0)?) as usize;
        if rank > 8 {
            return Err(Error::Backend(format!("implausible tensor rank {rank}")));
        }
        let dims: Vec<u32> = (0..rank)
            .map(|i| word(1 + i).map(u32::from_le_bytes))
            .collect::<Result<_>>()?;
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize));
        let count = count.ok_or_else(|| Error::Backend("tensor size overflows".into()))?;
        let header = 4 * (1 + rank);
        if bytes.len() != header + 4 * count {
            return Err(Error::Backend(format!(
                "tensor payload is {} bytes, dims {dims:?} need {}",
                bytes.len() - header.min(bytes.len()),
                4 * count
            )));
        }
        let data = bytes[header..]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        Ok(Tensor { dims, data })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Encode,
    Generate,
    Features,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestHeader {
    pub op: Op,
    pub id: String,
}

/// Reads one request (header line plus tensor) from a server's stdin.
pub fn read_request(mut input: impl Read) -> Result<(RequestHeader, Tensor)> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::Backend(format!("reading request: {e}")))?;
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Backend("request lacks a header line".into()))?;
    let header: RequestHeader = serde_json::from_slice(&bytes[..newline])?;
    Ok((header, Tensor::decode(&bytes[newline + 1..])?))
}

/// Backend served by an external command.
#[derive(Debug, Clone)]
pub struct ExternalBackend {
    argv: Vec<String>,
    input_size: (usize, usize),
    latent_dim: usize,
}

impl ExternalBackend {
    /// `input_size` and `latent_dim` declare the model's shapes; responses
    /// that disagree are rejected.
    pub fn new(argv: Vec<String>, input_size: (usize, usize), latent_dim: usize) -> Result<Self> {
        if argv.is_empty() || argv[0].is_empty() {
            return Err(Error::Precondition(
                "external backend command is empty".into(),
            ));
        }
        Ok(ExternalBackend {
            argv,
            input_size,
            latent_dim,
        })
    }

    pub fn argv(&self) -> &[String] {
        &self.argv
    }

    pub fn call(&self, op: Op, input: &Tensor) -> Result<Tensor> {
        let payload = input.encode();
        let header = RequestHeader {
            op,
            id: fsio::sha256_hex(&payload)[..16].to_string(),
        };
        let mut child = Command::new(&self.argv[0])
            .args(&self.argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Backend(format!("spawning `{}`: {e}", self.argv[0])))?;
        {
            let mut stdin = child.stdin.take().expect("stdin is piped");
            let mut request = serde_json::to_vec(&header)?;
            request.push(b'\n');
            request.extend(payload);
            stdin
                .write_all(&request)
                .map_err(|e| Error::Backend(format!("writing request: {e}")))?;
        }
        let out = child
            .wait_with_output()
            .map_err(|e| Error::Backend(format!("waiting for backend: {e}")))?;
        if !out.status.success() {
            return Err(Error::Backend(format!(
                "backend exited with {}: {}",
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        Tensor::decode(&out.stdout)
    }
}

impl EncoderBackend for ExternalBackend {
    fn input_size(&self) -> (usize, usize) {
        self.input_size
    }

    fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    fn encode(&self, image: &FaceImage) -> Result<LatentVector> {
        if image.size() != self.input_size {
            return Err(Error::ResizeRequired {
                expected: self.input_size,
                actual: image.size(),
            });
        }
        let z = self.call(Op::Encode, &Tensor::image(image))?;
        if z.data.len() != self.latent_dim {
            return Err(Error::Backend(format!(
                "encoder returned {} latents, expected {}",
                z.data.len(),
                self.latent_dim
            )));
        }
        LatentVector::new(z.to_f64())
    }
}

impl GeneratorBackend for ExternalBackend {
    fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    fn output_size(&self) -> (usize, usize) {
        self.input_size
    }

    fn generate(&self, z: &LatentVector) -> Result<FaceImage> {
        let image = self
            .call(Op::Generate, &Tensor::vector(z.values()))?
            .to_image()?;
        if image.size() != self.input_size {
            return Err(Error::Backend(format!(
                "generator returned {:?}, expected {:?}",
                image.size(),
                self.input_size
            )));
        }
        Ok(image)
    }

    fn parameter_digest(&self) -> String {
        fsio::sha256_hex(self.argv.join("\0").as_bytes())
    }
}

impl PerceptualBackend for ExternalBackend {
    fn features(&self, image: &FaceImage) -> Result<Vec<f64>> {
        Ok(self.call(Op::Features, &Tensor::image(image))?.to_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn tensor_round_trip(dims in proptest::collection::vec(1u32..5, 0..4), seed in any::<u64>()) {
            let n: usize = dims.iter().map(|&d| d as usize).product();
            let data: Vec<f32> = (0..n).map(|i| (seed.wrapping_mul(i as u64 + 1) % 1000) as f32 / 7.0).collect();
            let t = Tensor::new(dims, data).unwrap();
            prop_assert_eq!(Tensor::decode(&t.encode()).unwrap(), t);
        }
    }

    #[test]
    fn tensor_layout_is_little_endian() {
        let t = Tensor::new(vec![2], vec![1.0, -2.0]).unwrap();
        let bytes = t.encode();
        assert_eq!(&bytes[..8], &[1, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(&bytes[8..12], &1.0f32.to_le_bytes());
    }

    #[test]
    fn malformed_tensors_are_rejected() {
        assert!(Tensor::decode(&[1, 0, 0]).is_err());
        let mut bytes = Tensor::new(vec![3], vec![0.0; 3]).unwrap().encode();
        bytes.pop();
        assert!(Tensor::decode(&bytes).is_err());
        assert!(Tensor::new(vec![2, 2], vec![0.0; 3]).is_err());
    }

    #[test]
    fn request_parsing() {
        let mut req = br#"{"op":"features","id":"abc"}"#.to_vec();
        req.push(b'\n');
        req.extend(Tensor::vector(&[0.5, 0.25]).encode());
        let (h, t) = read_request(&req[..]).unwrap();
        assert_eq!(h.op, Op::Features);
        assert_eq!(t.data, vec![0.5, 0.25]);
    }

    #[test]
    fn missing_command_fails_cleanly() {
        let b = ExternalBackend::new(vec!["/nonexistent/backend".into()], (8, 8), 4).unwrap();
        let err =
            EncoderBackend::encode(&b, &FaceImage::filled(8, 8, [0.5; 3]).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Backend(_)));
    }
}
