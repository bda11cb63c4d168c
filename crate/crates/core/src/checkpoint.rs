//! Versioned little-endian binary encoding of networks, optimizer state and
//! trainer checkpoints. The byte layout is documented in
//! `docs/checkpoint-format.md`.

use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::nn::{Activation, AdamState, Dense, DenseNet, LayerGrad};
use crate::qnet::{MultiHeadNet, NetPair};
use crate::update::HeadOptimizers;

pub const FORMAT_VERSION: u16 = 1;

const NET_MAGIC: &[u8; 4] = b"DNET";
const ADAM_MAGIC: &[u8; 4] = b"ADAM";
const CKPT_MAGIC: &[u8; 4] = b"BDQN";

#[derive(Default)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u16(&mut self, v: u16) {
        self.bytes(&v.to_le_bytes());
    }

    fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.bytes(&v.to_le_bytes());
    }

    fn f64s<'a>(&mut self, vs: impl IntoIterator<Item = &'a f64>) {
        for v in vs {
            self.f64(*v);
        }
    }

    pub fn dense_net(&mut self, net: &DenseNet) {
        self.bytes(NET_MAGIC);
        self.u16(FORMAT_VERSION);
        self.u32(net.layers().len() as u32);
        for l in net.layers() {
            self.u32(l.in_dim() as u32);
            self.u32(l.out_dim() as u32);
            self.u8(l.activation.code());
        }
        for l in net.layers() {
            // standard layout, so iteration order is row-major
            self.f64s(l.weights.iter());
            self.f64s(l.bias.iter());
        }
    }

    pub fn adam_state(&mut self, st: &AdamState) {
        self.bytes(ADAM_MAGIC);
        self.u16(FORMAT_VERSION);
        self.u64(st.t);
        self.f64(st.lr);
        self.f64(st.beta1);
        self.f64(st.beta2);
        self.f64(st.eps);
        self.u32(st.m.len() as u32);
        for g in &st.m {
            self.u32(g.weights.ncols() as u32);
            self.u32(g.weights.nrows() as u32);
        }
        for moments in [&st.m, &st.v] {
            for g in moments {
                self.f64s(g.weights.iter());
                self.f64s(g.bias.iter());
            }
        }
    }

    fn multi_head(&mut self, net: &MultiHeadNet) {
        self.u32(net.head_count() as u32);
        self.dense_net(net.body());
        for h in net.heads() {
            self.dense_net(h);
        }
    }
}

pub struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn magic(&mut self, expect: &[u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != expect {
            return Err(Error::Format(format!(
                "expected magic {:?}, found {:?}",
                String::from_utf8_lossy(expect),
                String::from_utf8_lossy(got)
            )));
        }
        let version = self.u16()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        Ok(())
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Array2<f64>> {
        let data = (0..rows * cols).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        Ok(Array2::from_shape_vec((rows, cols), data).expect("length matches shape"))
    }

    fn vector(&mut self, n: usize) -> Result<Array1<f64>> {
        Ok(Array1::from(
            (0..n).map(|_| self.f64()).collect::<Result<Vec<_>>>()?,
        ))
    }

    fn dims(&mut self, n: usize) -> Result<Vec<(usize, usize)>> {
        (0..n)
            .map(|_| Ok((self.u32()? as usize, self.u32()? as usize)))
            .collect()
    }

    pub fn dense_net(&mut self) -> Result<DenseNet> {
        self.magic(NET_MAGIC)?;
        let n = self.u32()? as usize;
        let mut shapes = Vec::with_capacity(n);
        for _ in 0..n {
            let (i, o) = (self.u32()? as usize, self.u32()? as usize);
            let code = self.u8()?;
            let act = Activation::from_code(code)
                .ok_or_else(|| Error::Format(format!("unknown activation code {code}")))?;
            shapes.push((i, o, act));
        }
        let mut layers = Vec::with_capacity(n);
        for (i, o, activation) in shapes {
            let weights = self.matrix(o, i)?;
            let bias = self.vector(o)?;
            layers.push(Dense {
                weights,
                bias,
                activation,
            });
        }
        DenseNet::new(layers)
    }

    pub fn adam_state(&mut self) -> Result<AdamState> {
        self.magic(ADAM_MAGIC)?;
        let t = self.u64()?;
        let lr = self.f64()?;
        let beta1 = self.f64()?;
        let beta2 = self.f64()?;
        let eps = self.f64()?;
        let n = self.u32()? as usize;
        let dims = self.dims(n)?;
        let read = |dec: &mut Self| -> Result<Vec<LayerGrad>> {
            dims.iter()
                .map(|&(i, o)| {
                    Ok(LayerGrad {
                        weights: dec.matrix(o, i)?,
                        bias: dec.vector(o)?,
                    })
                })
                .collect()
        };
        let m = read(self)?;
        let v = read(self)?;
        Ok(AdamState {
            m,
            v,
            t,
            lr,
            beta1,
            beta2,
            eps,
        })
    }

    fn multi_head(&mut self) -> Result<MultiHeadNet> {
        let k = self.u32()? as usize;
        let body = self.dense_net()?;
        let heads = (0..k).map(|_| self.dense_net()).collect::<Result<Vec<_>>>()?;
        MultiHeadNet::new(body, heads)
    }
}

pub fn encode_dense_net(net: &DenseNet) -> Vec<u8> {
    let mut e = Encoder::new();
    e.dense_net(net);
    e.into_bytes()
}

pub fn decode_dense_net(bytes: &[u8]) -> Result<DenseNet> {
    let mut d = Decoder::new(bytes);
    let net = d.dense_net()?;
    d.finish()?;
    Ok(net)
}

pub fn encode_adam_state(st: &AdamState) -> Vec<u8> {
    let mut e = Encoder::new();
    e.adam_state(st);
    e.into_bytes()
}

pub fn decode_adam_state(bytes: &[u8]) -> Result<AdamState> {
    let mut d = Decoder::new(bytes);
    let st = d.adam_state()?;
    d.finish()?;
    Ok(st)
}

/// Everything needed to resume evaluation or training of a run, except the
/// replay buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub frames: u64,
    pub steps: u64,
    pub pair: NetPair,
    pub optimizers: HeadOptimizers,
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let mut e = Encoder::new();
        e.bytes(CKPT_MAGIC);
        e.u16(FORMAT_VERSION);
        e.u64(self.frames);
        e.u64(self.steps);
        e.u64(self.pair.frames_since_sync);
        e.multi_head(&self.pair.policy);
        e.multi_head(&self.pair.target);
        e.adam_state(&self.optimizers.body);
        e.u32(self.optimizers.heads.len() as u32);
        for h in &self.optimizers.heads {
            e.adam_state(h);
        }
        e.into_bytes()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut d = Decoder::new(bytes);
        d.magic(CKPT_MAGIC)?;
        let frames = d.u64()?;
        let steps = d.u64()?;
        let frames_since_sync = d.u64()?;
        let policy = d.multi_head()?;
        let target = d.multi_head()?;
        let body = d.adam_state()?;
        let k = d.u32()? as usize;
        let heads = (0..k).map(|_| d.adam_state()).collect::<Result<Vec<_>>>()?;
        d.finish()?;
        if !policy.same_shape(&target) {
            return Err(Error::Format("policy and target shapes differ".into()));
        }
        Ok(Self {
            frames,
            steps,
            pair: NetPair {
                policy,
                target,
                frames_since_sync,
            },
            optimizers: HeadOptimizers { body, heads },
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::decode(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;

    #[test]
    fn dense_net_header_layout() {
        let net = DenseNet::zeros(&[3, 2]).unwrap();
        let bytes = encode_dense_net(&net);
        assert_eq!(&bytes[0..4], b"DNET");
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
        assert_eq!(u32::from_le_bytes(bytes[6..10].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[10..14].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[14..18].try_into().unwrap()), 2);
        assert_eq!(bytes[18], 0);
        assert_eq!(bytes.len(), 19 + 8 * (6 + 2));
    }

    #[test]
    fn weights_are_row_major() {
        let mut net = DenseNet::zeros(&[2, 2]).unwrap();
        net.layers_mut()[0].weights[[0, 1]] = 5.0;
        let bytes = encode_dense_net(&net);
        let off = 10 + 9;
        let second = f64::from_le_bytes(bytes[off + 8..off + 16].try_into().unwrap());
        assert_eq!(second, 5.0);
    }

    #[test]
    fn adam_state_roundtrip() {
        let mut rng = StreamRng::from_seed(4);
        let net = DenseNet::init(&[4, 6, 3], &mut rng).unwrap();
        let mut st = AdamState::new(&net, 1e-3);
        st.t = 17;
        st.m[1].bias[2] = 0.25;
        st.v[0].weights[[5, 3]] = 1.5;
        assert_eq!(decode_adam_state(&encode_adam_state(&st)).unwrap(), st);
    }

    #[test]
    fn rejects_corrupt_input() {
        let net = DenseNet::zeros(&[3, 2]).unwrap();
        let mut bytes = encode_dense_net(&net);
        assert!(matches!(
            decode_dense_net(&bytes[..bytes.len() - 1]),
            Err(Error::Format(_))
        ));
        bytes[0] = b'X';
        assert!(matches!(decode_dense_net(&bytes), Err(Error::Format(_))));
    }
}
