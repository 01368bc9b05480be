//! Factor→variable update kernels.
//!
//! Binary kernels use the scalar log-odds convention `n = m(1) - m(0)`.
//! Vector kernels take and return one log-space vector per neighbour.

use crate::error::{Error, Result};

/// `max(0, a + w) - max(0, a)`, evaluated without cancellation when `|a|`
/// is huge (clamped variables carry log-odds of order 1e30).
#[inline]
pub fn pair_update(a: f64, w: f64) -> f64 {
    if w >= 0.0 {
        (a + w).clamp(0.0, w)
    } else {
        (-a).clamp(w, 0.0)
    }
}

/// Log-odds of a two-entry log-space vector.
#[inline]
pub fn log_odds(m: &[f64]) -> f64 {
    m[1] - m[0]
}

/// Writes the normalized two-entry vector with log-odds `n` into `out`.
#[inline]
pub fn from_log_odds(n: f64, out: &mut [f64]) {
    if n >= 0.0 {
        out[0] = -n;
        out[1] = 0.0;
    } else {
        out[0] = 0.0;
        out[1] = n;
    }
}

/// Messages of an OR factor `b = t_1 ∨ … ∨ t_n`.
///
/// `incoming` holds the top log-odds followed by the bottom log-odds;
/// `outgoing` receives messages in the same order.
pub fn or_factor_messages(incoming: &[f64], outgoing: &mut [f64]) -> Result<()> {
    if incoming.len() < 2 {
        return Err(Error::structural("OR factor needs at least one top variable"));
    }
    if outgoing.len() != incoming.len() {
        return Err(Error::structural("OR factor output length mismatch"));
    }
    let mut scratch = Vec::new();
    or_messages_into(incoming, outgoing, &mut scratch);
    Ok(())
}

pub(crate) fn or_messages_into(incoming: &[f64], outgoing: &mut [f64], scratch: &mut Vec<f64>) {
    let n = incoming.len() - 1;
    let tops = &incoming[..n];
    let nb = incoming[n];

    // Largest and second-largest top message, lowest index on ties.
    let mut t1 = 0;
    for j in 1..n {
        if tops[j] > tops[t1] {
            t1 = j;
        }
    }
    let mut t2 = usize::MAX;
    for j in 0..n {
        if j != t1 && (t2 == usize::MAX || tops[j] > tops[t2]) {
            t2 = j;
        }
    }

    // suffix[j] = Σ_{k≥j} max(0, n_k); prefix accumulated on the fly.
    scratch.clear();
    scratch.resize(n + 1, 0.0);
    for j in (0..n).rev() {
        scratch[j] = scratch[j + 1] + tops[j].max(0.0);
    }
    let mut prefix = 0.0;
    for i in 0..n {
        let others = prefix + scratch[i + 1];
        let best = if i == t1 { t2 } else { t1 };
        let escape = if best == usize::MAX {
            f64::INFINITY
        } else {
            (-tops[best]).max(0.0)
        };
        outgoing[i] = (nb + others).min(escape);
        prefix += tops[i].max(0.0);
    }
    let rest: f64 = tops
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != t1)
        .map(|(_, v)| v.max(0.0))
        .sum();
    outgoing[n] = tops[t1] + rest;
}

/// Messages of an AND factor `b = t_1 ∧ t_2`; order `[t_1, t_2, b]`.
pub fn and_factor_messages(incoming: &[f64], outgoing: &mut [f64]) -> Result<()> {
    if incoming.len() != 3 || outgoing.len() != 3 {
        return Err(Error::structural("AND factor needs exactly two tops and one bottom"));
    }
    and_messages_into(incoming, outgoing);
    Ok(())
}

#[inline]
pub(crate) fn and_messages_into(incoming: &[f64], outgoing: &mut [f64]) {
    let (n1, n2, nb) = (incoming[0], incoming[1], incoming[2]);
    outgoing[0] = pair_update(n2, nb);
    outgoing[1] = pair_update(n1, nb);
    outgoing[2] = (n1 + n2).min(n1).min(n2);
}

/// Generic max-marginalization of a dense log-potential table.
///
/// `cards[k]` is the cardinality of neighbour `k`, `incoming[k]` its
/// variable→factor message. Returns unnormalized outgoing messages.
pub fn dense_factor_messages(
    table: &[f64],
    cards: &[usize],
    incoming: &[&[f64]],
) -> Result<Vec<Vec<f64>>> {
    let states: u128 = cards.iter().map(|&c| c as u128).product();
    if states > super::DENSE_STATE_BUDGET as u128 {
        return Err(Error::Capacity {
            what: "dense factor".into(),
            required: states,
            budget: super::DENSE_STATE_BUDGET as u128,
        });
    }
    if table.len() as u128 != states || incoming.len() != cards.len() {
        return Err(Error::structural("dense factor shape mismatch"));
    }
    for (m, &c) in incoming.iter().zip(cards) {
        if m.len() != c {
            return Err(Error::structural("incoming message length differs from cardinality"));
        }
    }
    let mut out: Vec<Vec<f64>> = cards.iter().map(|&c| vec![f64::NEG_INFINITY; c]).collect();
    let mut scratch = Vec::new();
    dense_into(table, cards, |k, s| incoming[k][s], |k, s, v| {
        let slot = &mut out[k][s];
        if v > *slot {
            *slot = v;
        }
    }, &mut scratch);
    Ok(out)
}

/// Walks every joint state and reports, for each slot `k`, the table entry
/// plus all incoming messages except slot `k`'s.
pub(crate) fn dense_into(
    table: &[f64],
    cards: &[usize],
    msg: impl Fn(usize, usize) -> f64,
    mut emit: impl FnMut(usize, usize, f64),
    scratch: &mut Vec<f64>,
) {
    let d = cards.len();
    let mut states = vec![0usize; d];
    scratch.clear();
    scratch.resize(d + 1, 0.0);
    for &entry in table {
        // scratch[k] = Σ_{l≥k} m_l(x_l)
        scratch[d] = 0.0;
        for k in (0..d).rev() {
            scratch[k] = scratch[k + 1] + msg(k, states[k]);
        }
        let mut prefix = 0.0;
        for k in 0..d {
            emit(k, states[k], entry + prefix + scratch[k + 1]);
            prefix += msg(k, states[k]);
        }
        let mut k = d;
        while k > 0 {
            k -= 1;
            states[k] += 1;
            if states[k] < cards[k] {
                break;
            }
            states[k] = 0;
        }
    }
}

/// 2×2 table kernel; `t` is row-major with the first neighbour as row.
#[inline]
pub(crate) fn pair_table_into(t: &[f64; 4], a: &[f64], b: &[f64], out_a: &mut [f64], out_b: &mut [f64]) {
    out_b[0] = (t[0] + a[0]).max(t[2] + a[1]);
    out_b[1] = (t[1] + a[0]).max(t[3] + a[1]);
    out_a[0] = (t[0] + b[0]).max(t[1] + b[1]);
    out_a[1] = (t[2] + b[0]).max(t[3] + b[1]);
}
