//! Labeled datasets of adjacency matrices: enumerated positives, sampled
//! negatives, class-ratio selection, stratified splits and CSV output.

use std::collections::HashSet;
use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smallvec::SmallVec;
use thiserror::Error;

use crate::counter::enumerate_solutions_until;
use crate::props::{encode, evaluate, lex_leader_symbreak, AdjacencyMatrix, PropError, PropertyId, PropertySpec};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DatasetError {
    #[error("positive enumeration stopped after {found} solutions (time limit)")]
    Enumeration { found: u64 },
    #[error("negative sampling gave up after {rejected} rejections with {found} of {wanted} samples")]
    Negatives { found: usize, wanted: usize, rejected: u64 },
    #[error("requested {needed} positives but only {available} exist")]
    Shortfall { needed: u64, available: u64 },
    #[error("split {ratio} of {samples} samples leaves one side empty")]
    DegenerateSplit { ratio: SplitRatio, samples: usize },
    #[error("invalid split ratio '{0}'")]
    Ratio(String),
    #[error("sample {index} has {found} features, expected {expected}")]
    FeatureLength { index: usize, found: usize, expected: usize },
    #[error("csv line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error("metadata: {0}")]
    Meta(String),
    #[error(transparent)]
    Prop(#[from] PropError),
}

/// Fixed-length bit vector of boolean features.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureVec {
    len: usize,
    words: SmallVec<[u64; 2]>,
}

impl FeatureVec {
    pub fn zeros(len: usize) -> Self {
        FeatureVec { len, words: SmallVec::from_elem(0, len.div_ceil(64)) }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = FeatureVec::zeros(bits.len());
        for (k, &b) in bits.iter().enumerate() {
            if b {
                v.set(k, true);
            }
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, k: usize) -> bool {
        assert!(k < self.len, "feature {k} out of range");
        self.words[k / 64] >> (k % 64) & 1 == 1
    }

    pub fn set(&mut self, k: usize, value: bool) {
        assert!(k < self.len, "feature {k} out of range");
        let bit = 1u64 << (k % 64);
        if value {
            self.words[k / 64] |= bit;
        } else {
            self.words[k / 64] &= !bit;
        }
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len).map(|k| self.get(k)).collect()
    }

    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }

    fn random(len: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut v = FeatureVec::zeros(len);
        for (i, w) in v.words.iter_mut().enumerate() {
            let bits = (len - 64 * i).min(64);
            let mask = if bits == 64 { u64::MAX } else { (1u64 << bits) - 1 };
            *w = rng.gen::<u64>() & mask;
        }
        v
    }
}

/// One labeled matrix; features are cells in row-major order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sample {
    pub features: FeatureVec,
    pub label: bool,
}

impl Sample {
    pub fn matrix(&self, scope: usize) -> AdjacencyMatrix {
        AdjacencyMatrix::new(scope, self.features.to_bools()).expect("feature length matches scope")
    }
}

/// Train and test percentages; both at least 1, summing to 100.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitRatio {
    train: u32,
    test: u32,
}

impl SplitRatio {
    pub fn new(train: u32, test: u32) -> Result<Self, DatasetError> {
        if train == 0 || test == 0 || train + test != 100 {
            return Err(DatasetError::Ratio(format!("{train}:{test}")));
        }
        Ok(SplitRatio { train, test })
    }

    pub fn train_percent(&self) -> u32 {
        self.train
    }

    pub fn test_percent(&self) -> u32 {
        self.test
    }
}

impl fmt::Display for SplitRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.train, self.test)
    }
}

impl FromStr for SplitRatio {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DatasetError::Ratio(s.to_string());
        let (a, b) = s.split_once(':').ok_or_else(bad)?;
        let a = a.trim().parse().map_err(|_| bad())?;
        let b = b.trim().parse().map_err(|_| bad())?;
        SplitRatio::new(a, b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub spec: PropertySpec,
    pub symbreak: bool,
    pub seed: u64,
    pub samples: Vec<Sample>,
}

impl Dataset {
    /// Wraps samples after checking their feature length.
    pub fn new(spec: PropertySpec, symbreak: bool, seed: u64, samples: Vec<Sample>) -> Result<Self, DatasetError> {
        let expected = spec.num_cells();
        if let Some((index, s)) = samples.iter().enumerate().find(|(_, s)| s.features.len() != expected) {
            return Err(DatasetError::FeatureLength { index, found: s.features.len(), expected });
        }
        Ok(Dataset { spec, symbreak, seed, samples })
    }

    pub fn feature_count(&self) -> usize {
        self.spec.num_cells()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.samples.iter().filter(|s| s.label).count()
    }

    pub fn negatives(&self) -> usize {
        self.len() - self.positives()
    }

    pub fn to_csv(&self) -> String {
        let n = self.feature_count();
        let mut out = String::with_capacity((2 * n + 8) * (self.len() + 1));
        for k in 0..n {
            let _ = write!(out, "f{k},");
        }
        out.push_str("label\n");
        for s in &self.samples {
            for k in 0..n {
                out.push(if s.features.get(k) { '1' } else { '0' });
                out.push(',');
            }
            out.push(if s.label { '1' } else { '0' });
            out.push('\n');
        }
        out
    }

    /// Key-value sidecar describing how the samples were produced.
    pub fn meta(&self) -> String {
        format!(
            "property={}\nscope={}\nsymbreak={}\nseed={}\nsamples={}\npositives={}\nnegatives={}\n",
            self.spec.property.name(),
            self.spec.scope(),
            self.symbreak,
            self.seed,
            self.len(),
            self.positives(),
            self.negatives()
        )
    }

    /// Rebuilds a dataset from [`Dataset::to_csv`] and [`Dataset::meta`] output.
    pub fn from_csv(csv: &str, meta: &str) -> Result<Self, DatasetError> {
        let mut property = None;
        let mut scope = None;
        let mut symbreak = false;
        let mut seed = 0;
        for line in meta.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line.split_once('=').ok_or_else(|| DatasetError::Meta(format!("bad line '{line}'")))?;
            let bad = || DatasetError::Meta(format!("bad value for {k}: '{v}'"));
            match k.trim() {
                "property" => property = Some(v.trim().parse::<PropertyId>()?),
                "scope" => scope = Some(v.trim().parse::<usize>().map_err(|_| bad())?),
                "symbreak" => symbreak = v.trim().parse().map_err(|_| bad())?,
                "seed" => seed = v.trim().parse().map_err(|_| bad())?,
                _ => {}
            }
        }
        let property = property.ok_or_else(|| DatasetError::Meta("missing property".into()))?;
        let scope = scope.ok_or_else(|| DatasetError::Meta("missing scope".into()))?;
        let spec = PropertySpec::new(property, scope)?;
        let n = spec.num_cells();
        let mut lines = csv.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.split(',').count() == n + 1 && h.ends_with(",label") => {}
            _ => return Err(DatasetError::Csv { line: 1, msg: format!("expected header with {n} features") }),
        }
        let mut samples = Vec::new();
        for (i, line) in lines {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != n + 1 {
                return Err(DatasetError::Csv {
                    line: i + 1,
                    msg: format!("{} cells, expected {}", cells.len(), n + 1),
                });
            }
            let mut bits = Vec::with_capacity(n + 1);
            for c in cells {
                bits.push(match c {
                    "0" => false,
                    "1" => true,
                    other => return Err(DatasetError::Csv { line: i + 1, msg: format!("cell '{other}' is not 0/1") }),
                });
            }
            let label = bits.pop().unwrap();
            samples.push(Sample { features: FeatureVec::from_bools(&bits), label });
        }
        Dataset::new(spec, symbreak, seed, samples)
    }
}

/// Formula whose projected solutions are the positives.
pub fn positive_formula(spec: PropertySpec, symbreak: bool) -> crate::cnf::CnfFormula {
    let f = encode(spec);
    if symbreak && spec.scope() >= 2 {
        f.conjoin(&lex_leader_symbreak(spec.scope()).expect("scope checked"))
    } else {
        f
    }
}

/// All positives, in enumeration order.
pub fn gen_positive(spec: PropertySpec, symbreak: bool, timeout: Duration) -> Result<Vec<Sample>, DatasetError> {
    let f = positive_formula(spec, symbreak);
    let mut sols = enumerate_solutions_until(&f, None, timeout);
    let mut out = Vec::new();
    for a in sols.by_ref() {
        out.push(Sample { features: FeatureVec::from_bools(a.values()), label: true });
    }
    if sols.timed_out() {
        return Err(DatasetError::Enumeration { found: out.len() as u64 });
    }
    Ok(out)
}

/// `count` distinct uniformly drawn matrices that violate the property.
pub fn gen_negative(spec: PropertySpec, count: usize, seed: u64) -> Result<Vec<Sample>, DatasetError> {
    let n = spec.num_cells();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let limit = 64 * count as u64 + 10_000;
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    let mut rejected = 0u64;
    while out.len() < count {
        let fv = FeatureVec::random(n, &mut rng);
        let m = AdjacencyMatrix::new(spec.scope(), fv.to_bools()).expect("length matches");
        if !evaluate(spec.property, &m) && seen.insert(fv.clone()) {
            out.push(Sample { features: fv, label: false });
        } else {
            rejected += 1;
            if rejected > limit {
                return Err(DatasetError::Negatives { found: out.len(), wanted: count, rejected });
            }
        }
    }
    Ok(out)
}

/// All positives plus as many negatives, shuffled.
pub fn make_balanced(
    spec: PropertySpec,
    symbreak: bool,
    seed: u64,
    timeout: Duration,
) -> Result<Dataset, DatasetError> {
    let mut samples = gen_positive(spec, symbreak, timeout)?;
    let negatives = gen_negative(spec, samples.len(), seed)?;
    samples.extend(negatives);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    samples.shuffle(&mut rng);
    Dataset::new(spec, symbreak, seed, samples)
}

/// `total` samples of which `⌈total·valid_percent/100⌉` are positives drawn
/// from the enumerated set.
pub fn make_ratio(
    spec: PropertySpec,
    symbreak: bool,
    valid_percent: u32,
    total: usize,
    seed: u64,
    timeout: Duration,
) -> Result<Dataset, DatasetError> {
    if valid_percent > 100 {
        return Err(DatasetError::Ratio(format!("{valid_percent}%")));
    }
    let wanted_pos = (total as u64 * valid_percent as u64).div_ceil(100) as usize;
    let mut positives = gen_positive(spec, symbreak, timeout)?;
    if positives.len() < wanted_pos {
        return Err(DatasetError::Shortfall { needed: wanted_pos as u64, available: positives.len() as u64 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(3);
    let (chosen, _) = positives.partial_shuffle(&mut rng, wanted_pos);
    let mut samples = chosen.to_vec();
    samples.extend(gen_negative(spec, total - wanted_pos, seed)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    samples.shuffle(&mut rng);
    Dataset::new(spec, symbreak, seed, samples)
}

/// Stratified random partition; both sides keep dataset order.
pub fn split(ds: &Dataset, ratio: SplitRatio, seed: u64) -> Result<(Dataset, Dataset), DatasetError> {
    let n = ds.len();
    let pct = ratio.train_percent() as usize;
    let train_total = (n * pct + 50) / 100;
    let class_sizes = [ds.negatives(), ds.positives()];
    // largest-remainder allocation of train_total across classes
    let mut alloc = class_sizes.map(|c| c * pct / 100);
    let mut rest: Vec<usize> = (0..2).collect();
    rest.sort_by_key(|&c| (std::cmp::Reverse((class_sizes[c] * pct) % 100), c));
    let mut missing = train_total.saturating_sub(alloc[0] + alloc[1]);
    for &c in rest.iter().cycle().take(4) {
        if missing == 0 {
            break;
        }
        if alloc[c] < class_sizes[c] {
            alloc[c] += 1;
            missing -= 1;
        }
    }
    let train_n = alloc[0] + alloc[1];
    if train_n == 0 || train_n == n {
        return Err(DatasetError::DegenerateSplit { ratio, samples: n });
    }

    let mut in_train = vec![false; n];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(4);
    for (class, &k) in alloc.iter().enumerate() {
        let mut idx: Vec<usize> = (0..n).filter(|&i| ds.samples[i].label == (class == 1)).collect();
        let (chosen, _) = idx.partial_shuffle(&mut rng, k);
        for &i in chosen.iter() {
            in_train[i] = true;
        }
    }
    let (mut train, mut test) = (Vec::with_capacity(train_n), Vec::with_capacity(n - train_n));
    for (s, t) in ds.samples.iter().zip(in_train) {
        if t {
            train.push(s.clone());
        } else {
            test.push(s.clone());
        }
    }
    let side = |samples| Dataset { spec: ds.spec, symbreak: ds.symbreak, seed: ds.seed, samples };
    Ok((side(train), side(test)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(p: PropertyId, n: usize) -> PropertySpec {
        PropertySpec::new(p, n).unwrap()
    }

    const T: Duration = Duration::from_secs(60);

    #[test]
    fn feature_vec_bits() {
        let mut v = FeatureVec::zeros(130);
        v.set(0, true);
        v.set(129, true);
        assert!(v.get(0) && v.get(129) && !v.get(64));
        assert_eq!(FeatureVec::from_bools(&v.to_bools()), v);
    }

    #[test]
    fn positives_match_property() {
        let pos = gen_positive(spec(PropertyId::Bijective, 4), false, T).unwrap();
        assert_eq!(pos.len(), 24);
        for s in &pos {
            let m = s.matrix(4);
            assert!((0..4).all(|r| (0..4).filter(|&c| m.get(r, c)).count() == 1));
        }
    }

    #[test]
    fn negatives_reflexive() {
        let neg = gen_negative(spec(PropertyId::Reflexive, 3), 10, 5).unwrap();
        assert_eq!(neg.len(), 10);
        for s in &neg {
            assert!((0..3).any(|i| !s.features.get(i * 3 + i)));
        }
        assert_eq!(neg, gen_negative(spec(PropertyId::Reflexive, 3), 10, 5).unwrap());
    }

    #[test]
    fn negatives_give_up_when_exhausted() {
        // 16 matrices at scope 2, 4 of them reflexive: only 12 negatives exist.
        let err = gen_negative(spec(PropertyId::Reflexive, 2), 13, 1).unwrap_err();
        assert!(matches!(err, DatasetError::Negatives { found: 12, .. }));
    }

    #[test]
    fn balanced_equivalence() {
        let ds = make_balanced(spec(PropertyId::Equivalence, 4), false, 9, T).unwrap();
        assert_eq!((ds.positives(), ds.negatives()), (15, 15));
    }

    #[test]
    fn ratio_counts() {
        let ds = make_ratio(spec(PropertyId::Antisymmetric, 3), false, 75, 100, 3, T).unwrap();
        assert_eq!((ds.positives(), ds.negatives()), (75, 25));
        let err = make_ratio(spec(PropertyId::Bijective, 3), false, 50, 100, 3, T).unwrap_err();
        assert_eq!(err, DatasetError::Shortfall { needed: 50, available: 6 });
    }

    #[test]
    fn split_sizes() {
        let ds = make_ratio(spec(PropertyId::Antisymmetric, 3), false, 50, 100, 3, T).unwrap();
        let (tr, te) = split(&ds, "75:25".parse().unwrap(), 1).unwrap();
        assert_eq!((tr.len(), te.len()), (75, 25));
        assert_eq!(tr.positives() + te.positives(), 50);
        assert!("0:100".parse::<SplitRatio>().is_err());
        assert!("60:30".parse::<SplitRatio>().is_err());
    }

    #[test]
    fn csv_round_trip() {
        let ds = make_balanced(spec(PropertyId::Equivalence, 3), false, 2, T).unwrap();
        let csv = ds.to_csv();
        assert!(csv.starts_with("f0,f1,f2,f3,f4,f5,f6,f7,f8,label\n"));
        let back = Dataset::from_csv(&csv, &ds.meta()).unwrap();
        assert_eq!(back, ds);
    }
}
