//! Subsampled audit records and the block payloads that carry them.

use serde::{Deserialize, Serialize};

use crate::codec::bits::{bits_for_count, BitReader, BitWriter};
use crate::codec::{CheckpointCode, Frame, QuantizedUpdate};
use crate::compute::StateVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AuditKind {
    Checkpoint(CheckpointCode),
    /// Integer sum of the lattice indices of consecutive updates.
    Cumulative(QuantizedUpdate),
}

/// One stored state `Ỹ_τ`, covering iterations `t_start..=t_end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Audit {
    pub kind: AuditKind,
    pub t_start: u64,
    pub t_end: u64,
}

/// How the subsampling period is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PeriodRule {
    /// Largest `K` with `(L^K + 1) K ε ≤ Δ_ver`.
    #[default]
    DeviationBound,
    /// `K = ⌊Δ_ver / Δ_val⌋`, at least 1.
    ToleranceRatio,
}

/// Largest `K ≤ K_cap` with `(L^K + 1)·K·ε ≤ Δ_ver`.
pub fn choose_subsample_period(
    lipschitz: f64,
    max_error: f64,
    verify_tolerance: f64,
    cap: u64,
) -> Result<u64> {
    if cap == 0 {
        return Err(Error::InvalidParameter(
            "period cap must be at least 1".into(),
        ));
    }
    let fits = |k: u64| (lipschitz.powf(k as f64) + 1.0) * k as f64 * max_error <= verify_tolerance;
    if !fits(1) {
        return Err(Error::Infeasible(format!(
            "no subsampling period satisfies the verification tolerance {verify_tolerance}; \
             reduce the quantization error below {}",
            verify_tolerance / (lipschitz + 1.0)
        )));
    }
    // the left side grows with K, so the feasible set is a prefix
    let mut k = 1;
    while k < cap && fits(k + 1) {
        k += 1;
    }
    Ok(k)
}

/// Period from the configured rule.
pub fn subsample_period(
    rule: PeriodRule,
    lipschitz: f64,
    max_error: f64,
    verify_tolerance: f64,
    validate_tolerance: f64,
    cap: u64,
) -> Result<u64> {
    match rule {
        PeriodRule::DeviationBound => {
            choose_subsample_period(lipschitz, max_error, verify_tolerance, cap)
        }
        PeriodRule::ToleranceRatio => {
            Ok(((verify_tolerance / validate_tolerance).floor() as u64).clamp(1, cap.max(1)))
        }
    }
}

/// Checkpoint audit followed by cumulative audits over runs of at most `K` updates.
pub fn subsample_frame(frame: &Frame, period: u64) -> Result<Vec<Audit>> {
    if !frame.is_sealed() {
        return Err(Error::UnsealedFrame(frame.index()));
    }
    if period == 0 {
        return Err(Error::InvalidParameter("period must be at least 1".into()));
    }
    let t0 = frame.checkpoint_time();
    let mut audits = vec![Audit {
        kind: AuditKind::Checkpoint(frame.checkpoint().clone()),
        t_start: t0,
        t_end: t0,
    }];
    for (g, group) in frame.updates().chunks(period as usize).enumerate() {
        let d = group[0].indices.len();
        let mut sum = vec![0i64; d];
        for u in group {
            sum.iter_mut().zip(&u.indices).for_each(|(s, i)| *s += i);
        }
        let start = t0 + 1 + g as u64 * period;
        audits.push(Audit {
            kind: AuditKind::Cumulative(QuantizedUpdate {
                indices: sum,
                level: 0,
            }),
            t_start: start,
            t_end: start + group.len() as u64 - 1,
        });
    }
    Ok(audits)
}

const TAG_FRAME: u8 = 0;
const TAG_RAW: u8 = 1;
const TAG_DELTA: u8 = 2;

/// Decoded block payload.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    /// A frame's audits: checkpoint time, period, update count, checkpoint code, cumulative sums.
    Frame {
        checkpoint_time: u64,
        period: u64,
        updates: u64,
        checkpoint: CheckpointCode,
        sums: Vec<Vec<i64>>,
    },
    /// One uncompressed state.
    Raw { t: u64, state: StateVector },
    /// One compressed delta.
    Delta { t: u64, indices: Vec<i64> },
}

fn index_width<'a>(values: impl Iterator<Item = &'a i64>) -> u32 {
    let max = values.map(|v| v.unsigned_abs()).max().unwrap_or(0);
    bits_for_count(2 * max + 1).max(1)
}

fn write_code(w: &mut BitWriter, code: &CheckpointCode) {
    match code {
        CheckpointCode::DictIndex(i) => {
            w.write_bits(0, 8);
            w.write_bytes(&i.to_le_bytes());
        }
        CheckpointCode::NewEntry(x) => {
            w.write_bits(1, 8);
            for v in x.as_slice() {
                w.write_bytes(&v.to_le_bytes());
            }
        }
    }
}

fn read_code(r: &mut BitReader<'_>, d: usize) -> Result<CheckpointCode> {
    match r.read_u8()? {
        0 => Ok(CheckpointCode::DictIndex(r.read_u64_le()?)),
        1 => {
            let mut v = Vec::with_capacity(d);
            for _ in 0..d {
                v.push(r.read_f64_le()?);
            }
            Ok(CheckpointCode::NewEntry(
                StateVector::new(v).map_err(|e| Error::Decode(e.to_string()))?,
            ))
        }
        t => Err(Error::Decode(format!("bad checkpoint tag {t}"))),
    }
}

impl Payload {
    pub fn from_frame(frame: &Frame, period: u64) -> Result<Payload> {
        let audits = subsample_frame(frame, period)?;
        let sums = audits
            .iter()
            .filter_map(|a| match &a.kind {
                AuditKind::Cumulative(u) => Some(u.indices.clone()),
                AuditKind::Checkpoint(_) => None,
            })
            .collect();
        Ok(Payload::Frame {
            checkpoint_time: frame.checkpoint_time(),
            period,
            updates: frame.len() as u64,
            checkpoint: frame.checkpoint().clone(),
            sums,
        })
    }

    /// Audits described by this payload.
    pub fn audits(&self) -> Vec<Audit> {
        match self {
            Payload::Frame {
                checkpoint_time,
                period,
                updates,
                checkpoint,
                sums,
            } => {
                let mut out = vec![Audit {
                    kind: AuditKind::Checkpoint(checkpoint.clone()),
                    t_start: *checkpoint_time,
                    t_end: *checkpoint_time,
                }];
                let last = checkpoint_time + updates;
                for (g, s) in sums.iter().enumerate() {
                    let start = checkpoint_time + 1 + g as u64 * period;
                    out.push(Audit {
                        kind: AuditKind::Cumulative(QuantizedUpdate {
                            indices: s.clone(),
                            level: 0,
                        }),
                        t_start: start,
                        t_end: (start + period - 1).min(last),
                    });
                }
                out
            }
            Payload::Raw { t, state } => vec![Audit {
                kind: AuditKind::Checkpoint(CheckpointCode::NewEntry(state.clone())),
                t_start: *t,
                t_end: *t,
            }],
            Payload::Delta { t, indices } => vec![Audit {
                kind: AuditKind::Cumulative(QuantizedUpdate {
                    indices: indices.clone(),
                    level: 0,
                }),
                t_start: *t,
                t_end: *t,
            }],
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = BitWriter::new();
        match self {
            Payload::Frame {
                checkpoint_time,
                period,
                updates,
                checkpoint,
                sums,
            } => {
                w.write_bits(TAG_FRAME as u64, 8);
                w.write_bytes(&checkpoint_time.to_le_bytes());
                w.write_bytes(&period.to_le_bytes());
                w.write_bytes(&updates.to_le_bytes());
                write_code(&mut w, checkpoint);
                let width = index_width(sums.iter().flatten());
                w.write_bits(width as u64, 8);
                for v in sums.iter().flatten() {
                    w.write_signed(*v, width);
                }
            }
            Payload::Raw { t, state } => {
                w.write_bits(TAG_RAW as u64, 8);
                w.write_bytes(&t.to_le_bytes());
                for v in state.as_slice() {
                    w.write_bytes(&v.to_le_bytes());
                }
            }
            Payload::Delta { t, indices } => {
                w.write_bits(TAG_DELTA as u64, 8);
                w.write_bytes(&t.to_le_bytes());
                let width = index_width(indices.iter());
                w.write_bits(width as u64, 8);
                for v in indices {
                    w.write_signed(*v, width);
                }
            }
        }
        w.finish().0
    }

    /// Parses a payload of states in `R^d`.
    pub fn decode(bytes: &[u8], d: usize) -> Result<Payload> {
        let mut r = BitReader::new(bytes);
        let read_packed = |r: &mut BitReader<'_>, count: usize| -> Result<Vec<i64>> {
            let width = r.read_u8()? as u32;
            if width == 0 || width > 64 {
                return Err(Error::Decode(format!("index width {width}")));
            }
            (0..count).map(|_| r.read_signed(width)).collect()
        };
        let p = match r.read_u8()? {
            TAG_FRAME => {
                let checkpoint_time = r.read_u64_le()?;
                let period = r.read_u64_le()?;
                let updates = r.read_u64_le()?;
                if period == 0 {
                    return Err(Error::Decode("zero period".into()));
                }
                let checkpoint = read_code(&mut r, d)?;
                let groups = updates.div_ceil(period);
                let cells = groups
                    .checked_mul(d as u64)
                    .filter(|c| *c <= r.remaining())
                    .ok_or_else(|| Error::Decode("audit count exceeds payload".into()))?;
                let flat = read_packed(&mut r, cells as usize)?;
                let sums = if d == 0 {
                    Vec::new()
                } else {
                    flat.chunks(d).map(<[i64]>::to_vec).collect()
                };
                Payload::Frame {
                    checkpoint_time,
                    period,
                    updates,
                    checkpoint,
                    sums,
                }
            }
            TAG_RAW => {
                let t = r.read_u64_le()?;
                let mut v = Vec::with_capacity(d);
                for _ in 0..d {
                    v.push(r.read_f64_le()?);
                }
                Payload::Raw {
                    t,
                    state: StateVector::new(v).map_err(|e| Error::Decode(e.to_string()))?,
                }
            }
            TAG_DELTA => {
                let t = r.read_u64_le()?;
                Payload::Delta {
                    t,
                    indices: read_packed(&mut r, d)?,
                }
            }
            tag => return Err(Error::Decode(format!("bad payload tag {tag}"))),
        };
        if r.remaining() >= 8 || r.read_bits(r.remaining() as u32)? != 0 {
            return Err(Error::Decode("trailing payload bits".into()));
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(n: usize) -> Frame {
        let mut f = Frame::new(0, CheckpointCode::DictIndex(0), 10);
        for k in 0..n as i64 {
            f.push_update(QuantizedUpdate {
                indices: vec![k, -1],
                level: 0,
            })
            .unwrap();
        }
        f.seal();
        f
    }

    #[test]
    fn period_examples() {
        assert_eq!(choose_subsample_period(1.0, 0.01, 0.1, 100).unwrap(), 5);
        assert_eq!(choose_subsample_period(0.0, 0.01, 0.1, 100).unwrap(), 10);
        assert_eq!(choose_subsample_period(0.0, 0.01, 0.1, 4).unwrap(), 4);
        assert_eq!(choose_subsample_period(1.0, 0.05, 0.1, 100).unwrap(), 1);
        assert!(matches!(
            choose_subsample_period(1.0, 0.06, 0.1, 100),
            Err(Error::Infeasible(_))
        ));
        assert_eq!(
            subsample_period(PeriodRule::ToleranceRatio, 1.0, 0.01, 0.1, 0.3, 10).unwrap(),
            1
        );
    }

    #[test]
    fn partition_of_seven_updates() {
        let audits = subsample_frame(&frame(7), 3).unwrap();
        let ranges: Vec<_> = audits.iter().map(|a| (a.t_start, a.t_end)).collect();
        assert_eq!(ranges, vec![(10, 10), (11, 13), (14, 16), (17, 17)]);
        match &audits[1].kind {
            AuditKind::Cumulative(u) => assert_eq!(u.indices, vec![3, -3]),
            _ => panic!(),
        }
    }

    #[test]
    fn period_one_keeps_every_update() {
        let f = frame(4);
        let audits = subsample_frame(&f, 1).unwrap();
        assert_eq!(audits.len(), 5);
        for (a, u) in audits[1..].iter().zip(f.updates()) {
            assert_eq!(a.kind, AuditKind::Cumulative(u.clone()));
        }
    }

    #[test]
    fn payload_round_trips() {
        for n in [0, 1, 7, 30] {
            let p = Payload::from_frame(&frame(n), 4).unwrap();
            let back = Payload::decode(&p.encode(), 2).unwrap();
            assert_eq!(back, p);
            assert_eq!(back.audits(), subsample_frame(&frame(n), 4).unwrap());
        }
        let raw = Payload::Raw {
            t: 3,
            state: StateVector::new(vec![1.5, -2.0]).unwrap(),
        };
        assert_eq!(Payload::decode(&raw.encode(), 2).unwrap(), raw);
        let delta = Payload::Delta {
            t: 9,
            indices: vec![-300, 7],
        };
        assert_eq!(Payload::decode(&delta.encode(), 2).unwrap(), delta);
        assert!(Payload::decode(&[7], 2).is_err());
    }
}
