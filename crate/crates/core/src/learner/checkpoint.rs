//! Self-describing binary learner snapshots.
//!
//! Layout: magic `HISCK1`, u32 format version, u32 header length, JSON
//! header (architecture, learner config, caller metadata), then
//! little-endian payload: parameters of actor, critic 1/2, target 1/2 as
//! f64; Adam state (u64 step, first moments, second moments) for actor and
//! both critics; `log_alpha` and its Adam state; the update generator
//! (32-byte seed, u64 stream, u128 word position).

use rand_chacha::rand_core::SeedableRng;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, ScalarAdam};
use super::config::LearnerConfig;
use super::nn::{DenseNet, Grads};
use super::sac::Sac;
use crate::error::{Error, Result};
use crate::rng::LabRng;
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 6] = b"HISCK1";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    obs_dim: usize,
    act_dim: usize,
    actor_sizes: Vec<usize>,
    critic_sizes: Vec<usize>,
    updates: u64,
    learner: LearnerConfig,
    #[serde(default)]
    input_scale: Vec<f64>,
    meta: serde_json::Value,
}

struct Writer(Vec<u8>);

impl Writer {
    fn floats<S: Scalar>(&mut self, xs: impl IntoIterator<Item = S>) {
        for x in xs {
            self.0.extend_from_slice(&x.as_f64().to_le_bytes());
        }
    }

    fn net<S: Scalar>(&mut self, net: &DenseNet<S>) {
        self.floats(net.params_flat());
    }

    fn adam<S: Scalar>(&mut self, a: &Adam<S>) {
        self.0.extend_from_slice(&a.t.to_le_bytes());
        self.floats(a.m.flat());
        self.floats(a.v.flat());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Structural("checkpoint truncated".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn floats<S: Scalar>(&mut self, n: usize) -> Result<Vec<S>> {
        (0..n).map(|_| self.f64().map(S::lit)).collect()
    }

    fn net<S: Scalar>(&mut self, net: &mut DenseNet<S>) -> Result<()> {
        let p = self.floats(net.num_params())?;
        net.set_params_flat(&p)
    }

    fn adam<S: Scalar>(&mut self, net: &DenseNet<S>) -> Result<Adam<S>> {
        let t = self.u64()?;
        let n = net.num_params();
        let mut m = DenseNet::zeros(&net.sizes(), net.activation);
        m.set_params_flat(&self.floats(n)?)?;
        let mut v = m.clone();
        v.set_params_flat(&self.floats(n)?)?;
        Ok(Adam {
            m: Grads { layers: m.layers },
            v: Grads { layers: v.layers },
            t,
        })
    }
}

impl<S: Scalar> Sac<S> {
    pub fn to_checkpoint_bytes(&self, meta: &serde_json::Value) -> Result<Vec<u8>> {
        let header = Header {
            obs_dim: self.obs_dim,
            act_dim: self.act_dim,
            actor_sizes: self.actor.sizes(),
            critic_sizes: self.critics[0].sizes(),
            updates: self.updates,
            learner: self.config.clone(),
            input_scale: self.input_scale.iter().map(|x| x.as_f64()).collect(),
            meta: meta.clone(),
        };
        let json = serde_json::to_vec(&header)?;
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(CHECKPOINT_MAGIC);
        w.0.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        w.0.extend_from_slice(&(json.len() as u32).to_le_bytes());
        w.0.extend_from_slice(&json);
        w.net(&self.actor);
        for n in self.critics.iter().chain(&self.targets) {
            w.net(n);
        }
        w.adam(&self.actor_opt);
        for a in &self.critic_opts {
            w.adam(a);
        }
        w.0.extend_from_slice(&self.log_alpha.to_le_bytes());
        w.0.extend_from_slice(&self.alpha_opt.m.to_le_bytes());
        w.0.extend_from_slice(&self.alpha_opt.v.to_le_bytes());
        w.0.extend_from_slice(&self.alpha_opt.t.to_le_bytes());
        w.0.extend_from_slice(&self.rng.get_seed());
        w.0.extend_from_slice(&self.rng.get_stream().to_le_bytes());
        w.0.extend_from_slice(&self.rng.get_word_pos().to_le_bytes());
        Ok(w.0)
    }

    /// Restores a learner and the caller metadata stored with it.
    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<(Self, serde_json::Value)> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(CHECKPOINT_MAGIC.len())? != CHECKPOINT_MAGIC {
            return Err(Error::Structural("not a learner checkpoint (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Structural(format!("unsupported checkpoint version {version}")));
        }
        let len = r.u32()? as usize;
        let header: Header = serde_json::from_slice(r.take(len)?)?;
        let mut sac = Sac::new(header.obs_dim, header.act_dim, header.learner, 0)?;
        if sac.actor.sizes() != header.actor_sizes || sac.critics[0].sizes() != header.critic_sizes {
            return Err(Error::Structural(
                "checkpoint architecture disagrees with its config".into(),
            ));
        }
        sac.set_input_scale(&header.input_scale.iter().map(|&x| S::lit(x)).collect::<Vec<_>>())?;
        r.net(&mut sac.actor)?;
        for k in 0..2 {
            r.net(&mut sac.critics[k])?;
        }
        for k in 0..2 {
            r.net(&mut sac.targets[k])?;
        }
        sac.actor_opt = r.adam(&sac.actor)?;
        for k in 0..2 {
            sac.critic_opts[k] = r.adam(&sac.critics[k])?;
        }
        sac.log_alpha = r.f64()?;
        sac.alpha_opt = ScalarAdam {
            m: r.f64()?,
            v: r.f64()?,
            t: r.u64()?,
        };
        let seed: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
        let stream = r.u64()?;
        let word_pos = u128::from_le_bytes(r.take(16)?.try_into().expect("16 bytes"));
        let mut rng = LabRng::from_seed(seed);
        rng.set_stream(stream);
        rng.set_word_pos(word_pos);
        sac.rng = rng;
        sac.updates = header.updates;
        if r.pos != bytes.len() {
            return Err(Error::Structural("trailing bytes after checkpoint payload".into()));
        }
        Ok((sac, header.meta))
    }
}
