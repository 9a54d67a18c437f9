//! Closed-form infection rates for the five basic channel scenarios:
//! point-to-point, two transmitters, two receivers, relaying (passive and
//! active), and ternary input (aerosol/droplet split).
//!
//! Each closed form is paired with an explicit channel constructor so the
//! formula can be compared against the exact evaluator in [`crate::dmc`].
//! For the point-to-point case the two routes agree identically; for the
//! multi-transmitter and ternary cases the printed sums coincide with the
//! exact joint-channel value only in degenerate regimes, which is why both
//! routes are exported.

use crate::dmc::{DmcChannel, EventAlphabet, InputDistribution};
use crate::error::{Error, Result};

fn check_prob(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(Error::InvalidParam(format!("{name} = {p}, outside [0,1]")));
    }
    Ok(())
}

/// Point-to-point parameters: `p1` is the probability an emitted particle is
/// infected, `q1` the probability an infected particle causes receiver
/// infection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZParams {
    pub p1: f64,
    pub q1: f64,
}

impl ZParams {
    pub fn new(p1: f64, q1: f64) -> Result<Self> {
        check_prob("p1", p1)?;
        check_prob("q1", q1)?;
        Ok(Self { p1, q1 })
    }
}

/// Parameters for the two-transmitter, two-receiver, and ternary-input
/// scenarios. The second pair `(p2, q2)` belongs to the second source,
/// second receiver, or droplet class depending on the scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPartyParams {
    pub p1: f64,
    pub q1: f64,
    pub p2: f64,
    pub q2: f64,
}

impl TwoPartyParams {
    pub fn new(p1: f64, q1: f64, p2: f64, q2: f64) -> Result<Self> {
        check_prob("p1", p1)?;
        check_prob("q1", q1)?;
        check_prob("p2", p2)?;
        check_prob("q2", q2)?;
        Ok(Self { p1, q1, p2, q2 })
    }
}

/// Relay scenario parameters. The first hop is the point-to-point channel
/// `(p1, q1)`; the second hop infects with probability `q2`. `boost` is the
/// relay's own emission infection probability once its incubation time has
/// passed; `delay_exceeds_incubation` selects between the passive and active
/// regimes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelayParams {
    pub p1: f64,
    pub q1: f64,
    pub q2: f64,
    pub boost: Option<f64>,
    pub delay_exceeds_incubation: bool,
}

impl RelayParams {
    pub fn new(
        p1: f64,
        q1: f64,
        q2: f64,
        boost: Option<f64>,
        delay_exceeds_incubation: bool,
    ) -> Result<Self> {
        check_prob("p1", p1)?;
        check_prob("q1", q1)?;
        check_prob("q2", q2)?;
        if let Some(b) = boost {
            check_prob("boost", b)?;
        }
        Ok(Self {
            p1,
            q1,
            q2,
            boost,
            delay_exceeds_incubation,
        })
    }
}

/// `-q * p * log2(p)`, with the zero convention at `p = 0` and `p = 1`.
/// Shared with the multi-size generalization in [`crate::mc::rate_curve`].
pub(crate) fn rate_term_for(p: f64, q: f64) -> f64 {
    rate_term(p, q)
}

fn rate_term(p: f64, q: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -q * p * p.log2()
    }
}

/// Infection rate of the point-to-point channel: `-q1 * p1 * log2(p1)`.
///
/// Monotonically increasing on `p1 in (0, 1/e]` with its maximum at
/// `p1 = 1/e`, and zero at both endpoints.
pub fn mi_z(params: &ZParams) -> f64 {
    rate_term(params.p1, params.q1)
}

/// Two independent transmitters into one receiver: the single-source rates
/// add, `mi_z(p1, q1) + mi_z(p2, q2)`.
pub fn mi_two_tx(params: &TwoPartyParams) -> f64 {
    rate_term(params.p1, params.q1) + rate_term(params.p2, params.q2)
}

/// One transmitter observed by two receivers. The rates act individually
/// rather than additively; returns `(rate at receiver 1, rate at receiver 2)`.
/// `p2` is unused (common source).
pub fn mi_two_rx(params: &TwoPartyParams) -> (f64, f64) {
    (
        rate_term(params.p1, params.q1),
        rate_term(params.p1, params.q2),
    )
}

/// Passive relay, second-hop form: the intermediate receiver re-emits without
/// amplification, so the final hop sees input probability `p1 * q1` and the
/// rate is `-q2 * (p1 q1) * log2(p1 q1)`.
///
/// Note this quantity measures the second hop in isolation; it can exceed the
/// first-hop rate `mi_z(p1, q1)` (for example `p1 = 0.5, q1 = 0.5, q2 = 1`
/// gives 0.5 against 0.25). The end-to-end quantity that respects the data
/// processing inequality is [`mi_relay_end_to_end`].
pub fn mi_passive_relay(params: &RelayParams) -> Result<f64> {
    if params.delay_exceeds_incubation {
        return Err(Error::InvalidParam(
            "passive relaying requires the delay to stay within the incubation time".into(),
        ));
    }
    Ok(rate_term(params.p1 * params.q1, params.q2))
}

/// Passive relay, end-to-end form: the two hops compose into a single
/// point-to-point channel with crossover `q1 * q2`, so the rate is
/// `mi_z(p1, q1 * q2)`. Never exceeds the first-hop rate `mi_z(p1, q1)`.
pub fn mi_relay_end_to_end(params: &RelayParams) -> Result<f64> {
    if params.delay_exceeds_incubation {
        return Err(Error::InvalidParam(
            "end-to-end passive relaying requires the delay to stay within the incubation time"
                .into(),
        ));
    }
    Ok(rate_term(params.p1, params.q1 * params.q2))
}

/// Active relay: past its incubation time the relay amplifies the viral load
/// and re-emits with its own infection probability `boost`, so the final-hop
/// rate is `-q2 * boost * log2(boost)`.
pub fn mi_active_relay(params: &RelayParams) -> Result<f64> {
    if !params.delay_exceeds_incubation {
        return Err(Error::InvalidParam(
            "active relaying requires the delay to exceed the incubation time".into(),
        ));
    }
    let boost = params.boost.ok_or_else(|| {
        Error::InvalidParam("active relaying requires the boost probability".into())
    })?;
    Ok(rate_term(boost, params.q2))
}

/// Ternary-input channel (uninfected / aerosol / droplet). The printed sum is
/// identical to the two-transmitter case; the third input event carries the
/// remaining probability, so `p1 + p2 <= 1` is required.
pub fn mi_ternary(params: &TwoPartyParams) -> Result<f64> {
    if params.p1 + params.p2 > 1.0 + 1e-12 {
        return Err(Error::InvalidParam(format!(
            "p1 + p2 = {} exceeds 1",
            params.p1 + params.p2
        )));
    }
    Ok(mi_two_tx(params))
}

/// Explicit point-to-point channel: binary input with `P(X=1) = p1`, binary
/// output, uninfected input never infects, infected input infects with
/// probability `q1`. Output event "1" is the infectious one.
pub fn z_channel(params: &ZParams) -> (DmcChannel, InputDistribution) {
    let ch = DmcChannel::new(
        EventAlphabet::numbered(2).expect("fixed alphabet"),
        EventAlphabet::numbered(2).expect("fixed alphabet"),
        vec![vec![1.0, 0.0], vec![1.0 - params.q1, params.q1]],
    )
    .expect("parameters validated on construction");
    let px = InputDistribution::new(vec![1.0 - params.p1, params.p1])
        .expect("parameters validated on construction");
    (ch, px)
}

/// Explicit two-transmitter channel on the product input alphabet
/// {"00","01","10","11"} (first digit = source 1 infected, second digit =
/// source 2 infected). The receiver is infected if either source's particle
/// lands, so `P(1 | x1 x2) = 1 - (1 - x1 q1)(1 - x2 q2)`.
pub fn two_tx_channel(params: &TwoPartyParams) -> (DmcChannel, InputDistribution) {
    let &TwoPartyParams { p1, q1, p2, q2 } = params;
    let hit = |x1: f64, x2: f64| 1.0 - (1.0 - x1 * q1) * (1.0 - x2 * q2);
    let rows: Vec<Vec<f64>> = [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]
        .iter()
        .map(|&(x1, x2)| {
            let h = hit(x1, x2);
            vec![1.0 - h, h]
        })
        .collect();
    let ch = DmcChannel::new(
        EventAlphabet::new(["00", "01", "10", "11"]).expect("fixed alphabet"),
        EventAlphabet::numbered(2).expect("fixed alphabet"),
        rows,
    )
    .expect("parameters validated on construction");
    let px = InputDistribution::new(vec![
        (1.0 - p1) * (1.0 - p2),
        (1.0 - p1) * p2,
        p1 * (1.0 - p2),
        p1 * p2,
    ])
    .expect("product of probabilities");
    (ch, px)
}

/// Explicit channels for the two-receiver scenario: each receiver sees its
/// own point-to-point channel from the common source.
pub fn two_rx_channels(
    params: &TwoPartyParams,
) -> (
    (DmcChannel, InputDistribution),
    (DmcChannel, InputDistribution),
) {
    let first = ZParams {
        p1: params.p1,
        q1: params.q1,
    };
    let second = ZParams {
        p1: params.p1,
        q1: params.q2,
    };
    (z_channel(&first), z_channel(&second))
}

/// Explicit composed relay channel: the cascade of the first hop `(q1)` and
/// the second hop `(q2)`, which is again a point-to-point channel with
/// `P(0|0) = 1`, `P(1|1) = q1 q2`.
pub fn relay_cascade_channel(params: &RelayParams) -> Result<(DmcChannel, InputDistribution)> {
    let (first, px) = z_channel(&ZParams {
        p1: params.p1,
        q1: params.q1,
    });
    let (second, _) = z_channel(&ZParams {
        p1: 0.5, // input distribution of the middle hop is irrelevant to the cascade
        q1: params.q2,
    });
    let composed = crate::dmc::cascade(&first, &second)?;
    Ok((composed, px))
}

/// Explicit ternary-input channel: events {uninfected, aerosol, droplet} with
/// probabilities `{1 - p1 - p2, p1, p2}` and infection probabilities
/// `{0, q1, q2}`.
pub fn ternary_channel(params: &TwoPartyParams) -> Result<(DmcChannel, InputDistribution)> {
    if params.p1 + params.p2 > 1.0 + 1e-12 {
        return Err(Error::InvalidParam(format!(
            "p1 + p2 = {} exceeds 1",
            params.p1 + params.p2
        )));
    }
    let p0 = (1.0 - params.p1 - params.p2).max(0.0);
    let ch = DmcChannel::new(
        EventAlphabet::numbered(3).expect("fixed alphabet"),
        EventAlphabet::numbered(2).expect("fixed alphabet"),
        vec![
            vec![1.0, 0.0],
            vec![1.0 - params.q1, params.q1],
            vec![1.0 - params.q2, params.q2],
        ],
    )
    .expect("parameters validated on construction");
    let px = InputDistribution::new(vec![p0, params.p1, params.p2])?;
    Ok((ch, px))
}
