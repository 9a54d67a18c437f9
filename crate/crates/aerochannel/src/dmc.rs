//! Exact evaluation of mutual information and infection measures for finite
//! discrete memoryless channels.
//!
//! A channel is a row-stochastic transition matrix between two finite event
//! alphabets. Everything here is exact double-precision arithmetic on those
//! matrices; the Monte Carlo side of the crate only ever feeds estimated
//! transition probabilities into these functions.
//!
//! All information quantities are returned in bits (base-2 logarithms), and
//! zero-probability terms follow the `0 * log 0 = 0` convention.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for probability-sum checks on distributions and matrix rows.
pub const PROB_TOL: f64 = 1e-12;

/// A finite, ordered alphabet of channel events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventAlphabet {
    labels: Vec<String>,
}

impl EventAlphabet {
    /// Build an alphabet from unique labels. At least one label is required.
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::InvalidParam("alphabet must not be empty".into()));
        }
        for (i, a) in labels.iter().enumerate() {
            if labels[..i].contains(a) {
                return Err(Error::InvalidParam(format!(
                    "duplicate alphabet label `{a}`"
                )));
            }
        }
        Ok(Self { labels })
    }

    /// Convenience constructor labeling events "0", "1", ..., `n - 1`.
    pub fn numbered(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| i.to_string()))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Index of a label, if present.
    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// A probability mass function over an event alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct InputDistribution {
    probs: Vec<f64>,
}

impl InputDistribution {
    /// Validates that every entry lies in [0,1] and the entries sum to one
    /// within [`PROB_TOL`].
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidProbability(
                "distribution must not be empty".into(),
            ));
        }
        for (i, &p) in probs.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(Error::InvalidProbability(format!(
                    "entry {i} is {p}, outside [0,1]"
                )));
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidProbability(format!(
                "entries sum to {sum}, expected 1 within {PROB_TOL:e}"
            )));
        }
        Ok(Self { probs })
    }

    /// Uniform distribution over `n` events.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidProbability(
                "distribution must not be empty".into(),
            ));
        }
        Self::new(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// A discrete memoryless channel: input and output alphabets plus a
/// row-stochastic transition matrix `transitions[i][j] = P(output j | input i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DmcChannel {
    input: EventAlphabet,
    output: EventAlphabet,
    transitions: Vec<Vec<f64>>,
}

impl DmcChannel {
    pub fn new(
        input: EventAlphabet,
        output: EventAlphabet,
        transitions: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if transitions.len() != input.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} transition rows for {} input events",
                transitions.len(),
                input.len()
            )));
        }
        for (i, row) in transitions.iter().enumerate() {
            if row.len() != output.len() {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries for {} output events",
                    row.len(),
                    output.len()
                )));
            }
            for (j, &p) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                    return Err(Error::InvalidProbability(format!(
                        "transition ({i},{j}) is {p}, outside [0,1]"
                    )));
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > PROB_TOL {
                return Err(Error::InvalidProbability(format!(
                    "transition row {i} sums to {sum}, expected 1 within {PROB_TOL:e}"
                )));
            }
        }
        Ok(Self {
            input,
            output,
            transitions,
        })
    }

    pub fn input(&self) -> &EventAlphabet {
        &self.input
    }

    pub fn output(&self) -> &EventAlphabet {
        &self.output
    }

    pub fn input_len(&self) -> usize {
        self.input.len()
    }

    pub fn output_len(&self) -> usize {
        self.output.len()
    }

    pub fn transitions(&self) -> &[Vec<f64>] {
        &self.transitions
    }

    /// `P(output j | input i)`.
    pub fn transition(&self, i: usize, j: usize) -> f64 {
        self.transitions[i][j]
    }

    fn check_input(&self, input: &InputDistribution) -> Result<()> {
        if input.len() != self.input.len() {
            return Err(Error::DimensionMismatch(format!(
                "input distribution has {} entries for {} input events",
                input.len(),
                self.input.len()
            )));
        }
        Ok(())
    }
}

/// The subset of output events that count as infectious.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfectiousSet {
    members: Vec<usize>,
}

impl InfectiousSet {
    /// Members must be valid output indices for `output_len` and free of
    /// duplicates. An empty set is allowed.
    pub fn new(members: impl IntoIterator<Item = usize>, output_len: usize) -> Result<Self> {
        let members: Vec<usize> = members.into_iter().collect();
        for (i, &m) in members.iter().enumerate() {
            if m >= output_len {
                return Err(Error::IndexOutOfRange(format!(
                    "infectious member {m} >= output cardinality {output_len}"
                )));
            }
            if members[..i].contains(&m) {
                return Err(Error::InvalidParam(format!(
                    "duplicate infectious member {m}"
                )));
            }
        }
        Ok(Self { members })
    }

    /// Every output event.
    pub fn all(output_len: usize) -> Self {
        Self {
            members: (0..output_len).collect(),
        }
    }

    pub fn empty() -> Self {
        Self {
            members: Vec::new(),
        }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }
}

/// Marginal output distribution `P(Y = y_j) = sum_i P(x_i) P(y_j | x_i)`.
pub fn output_marginal(
    channel: &DmcChannel,
    input: &InputDistribution,
) -> Result<InputDistribution> {
    channel.check_input(input)?;
    let mut out = vec![0.0; channel.output_len()];
    for (i, &px) in input.probs().iter().enumerate() {
        for (j, o) in out.iter_mut().enumerate() {
            *o += px * channel.transition(i, j);
        }
    }
    InputDistribution::new(out)
}

/// Contribution of a single output event to the mutual information, in bits:
///
/// `I(X; Y = y_j) = sum_i P(x_i) P(y_j|x_i) log2( P(y_j|x_i) / P(y_j) )`.
///
/// Summed over all outputs this reproduces the full mutual information.
/// Individual contributions may be negative for general channels; the signed
/// value is returned as-is.
pub fn per_output_mi(
    channel: &DmcChannel,
    input: &InputDistribution,
    output_index: usize,
) -> Result<f64> {
    channel.check_input(input)?;
    if output_index >= channel.output_len() {
        return Err(Error::IndexOutOfRange(format!(
            "output index {output_index} >= {}",
            channel.output_len()
        )));
    }
    let p_y = marginal_at(channel, input, output_index);
    let mut acc = 0.0;
    for (i, &px) in input.probs().iter().enumerate() {
        let joint = px * channel.transition(i, output_index);
        if joint > 0.0 {
            // joint > 0 forces p_y >= joint > 0, so the ratio is finite.
            debug_assert!(p_y > 0.0);
            acc += joint * (channel.transition(i, output_index) / p_y).log2();
        }
    }
    Ok(acc)
}

/// Average mutual information `I(X; Y)` in bits.
pub fn mutual_information(channel: &DmcChannel, input: &InputDistribution) -> Result<f64> {
    channel.check_input(input)?;
    let mut acc = 0.0;
    for j in 0..channel.output_len() {
        acc += per_output_mi(channel, input, j)?;
    }
    Ok(acc)
}

/// Infection rate `R`: the mutual information accumulated over the infectious
/// output events only, in bits per channel event. An empty set yields zero.
pub fn infection_rate(
    channel: &DmcChannel,
    input: &InputDistribution,
    infectious: &InfectiousSet,
) -> Result<f64> {
    channel.check_input(input)?;
    let mut acc = 0.0;
    for &j in infectious.members() {
        if j >= channel.output_len() {
            return Err(Error::IndexOutOfRange(format!(
                "infectious member {j} >= output cardinality {}",
                channel.output_len()
            )));
        }
        acc += per_output_mi(channel, input, j)?;
    }
    Ok(acc)
}

/// Rate accumulated over `n` respiratory events: `n * R`.
pub fn mutual_infection(rate: f64, n: u64) -> f64 {
    rate * n as f64
}

/// Probability-domain infection measure: the total probability that a channel
/// event lands in the infectious output set,
/// `sum_i sum_{j in set} P(x_i) P(y_j | x_i)`.
pub fn linear_infection_measure(
    channel: &DmcChannel,
    input: &InputDistribution,
    infectious: &InfectiousSet,
) -> Result<f64> {
    channel.check_input(input)?;
    let mut acc = 0.0;
    for &j in infectious.members() {
        if j >= channel.output_len() {
            return Err(Error::IndexOutOfRange(format!(
                "infectious member {j} >= output cardinality {}",
                channel.output_len()
            )));
        }
        acc += marginal_at(channel, input, j);
    }
    Ok(acc)
}

/// Compose two channels in series. The first channel's output alphabet must
/// equal the second channel's input alphabet; the result maps the first
/// input alphabet to the second output alphabet via the matrix product
/// `P(z|x) = sum_y P(z|y) P(y|x)`.
pub fn cascade(first: &DmcChannel, second: &DmcChannel) -> Result<DmcChannel> {
    if first.output != second.input {
        return Err(Error::DimensionMismatch(format!(
            "first channel output alphabet {:?} != second channel input alphabet {:?}",
            first.output.labels(),
            second.input.labels()
        )));
    }
    let mut transitions = vec![vec![0.0; second.output_len()]; first.input_len()];
    for (i, row) in transitions.iter_mut().enumerate() {
        for (k, cell) in row.iter_mut().enumerate() {
            let mut p = 0.0;
            for j in 0..first.output_len() {
                p += first.transition(i, j) * second.transition(j, k);
            }
            // Products of probabilities can land a hair above 1.0.
            *cell = p.clamp(0.0, 1.0);
        }
    }
    DmcChannel::new(first.input.clone(), second.output.clone(), transitions)
}

fn marginal_at(channel: &DmcChannel, input: &InputDistribution, j: usize) -> f64 {
    input
        .probs()
        .iter()
        .enumerate()
        .map(|(i, &px)| px * channel.transition(i, j))
        .sum()
}

/// Serialized form of a channel together with its input distribution.
///
/// ```json
/// {"inputs": ["0","1"], "outputs": ["0","1"], "p_x": [0.5, 0.5],
///  "transitions": [[1.0, 0.0], [0.5, 0.5]]}
/// ```
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelDocument {
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub p_x: Vec<f64>,
    pub transitions: Vec<Vec<f64>>,
}

impl ChannelDocument {
    pub fn from_parts(channel: &DmcChannel, input: &InputDistribution) -> Self {
        Self {
            inputs: channel.input().labels().to_vec(),
            outputs: channel.output().labels().to_vec(),
            p_x: input.probs().to_vec(),
            transitions: channel.transitions().to_vec(),
        }
    }

    /// Validate and split into a channel and input distribution.
    pub fn into_parts(self) -> Result<(DmcChannel, InputDistribution)> {
        let input = EventAlphabet::new(self.inputs)?;
        let output = EventAlphabet::new(self.outputs)?;
        let channel = DmcChannel::new(input, output, self.transitions)?;
        let dist = InputDistribution::new(self.p_x)?;
        channel.check_input(&dist)?;
        Ok((channel, dist))
    }

    pub fn from_json(json: &str) -> Result<(DmcChannel, InputDistribution)> {
        let doc: ChannelDocument = serde_json::from_str(json)?;
        doc.into_parts()
    }

    pub fn to_json(channel: &DmcChannel, input: &InputDistribution) -> String {
        serde_json::to_string_pretty(&Self::from_parts(channel, input))
            .expect("channel document serialization cannot fail")
    }
}
