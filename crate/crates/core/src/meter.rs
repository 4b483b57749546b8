//! Word-level accounting of algorithmic state.

use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Component {
    StoredPoints,
    SketchAccumulators,
    HashCoefficients,
    TreeBuffers,
    SamplerState,
}

impl Component {
    pub const ALL: [Component; 5] = [
        Component::StoredPoints,
        Component::SketchAccumulators,
        Component::HashCoefficients,
        Component::TreeBuffers,
        Component::SamplerState,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Component::StoredPoints => "stored_points",
            Component::SketchAccumulators => "sketch_accumulators",
            Component::HashCoefficients => "hash_coefficients",
            Component::TreeBuffers => "tree_buffers",
            Component::SamplerState => "sampler_state",
        }
    }

    fn index(&self) -> usize {
        *self as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhasePeak {
    pub name: String,
    pub peak_words: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryMeter {
    word_bits: u32,
    current: [u64; 5],
    peak_component: [u64; 5],
    peak_total: u64,
    phases: Vec<PhasePeak>,
}

/// Words needed by one stored weighted point: d coordinates plus a
/// numerator/denominator weight.
pub fn words_per_point(d: usize) -> u64 {
    d as u64 + 2
}

impl MemoryMeter {
    /// A word holds ceil(log2(n d delta)) bits.
    pub fn new(n: u64, d: usize, delta: u64) -> Self {
        let prod = (n.max(1) as f64) * (d.max(1) as f64) * (delta.max(2) as f64);
        let word_bits = (libm::ceil(libm::log2(prod)) as u32).max(1);
        MemoryMeter { word_bits, current: [0; 5], peak_component: [0; 5], peak_total: 0, phases: Vec::new() }
    }

    pub fn word_bits(&self) -> u32 {
        self.word_bits
    }

    pub fn set(&mut self, c: Component, words: u64) {
        self.current[c.index()] = words;
        self.bump();
    }

    pub fn add(&mut self, c: Component, words: u64) {
        self.current[c.index()] += words;
        self.bump();
    }

    pub fn get(&self, c: Component) -> u64 {
        self.current[c.index()]
    }

    pub fn total(&self) -> u64 {
        self.current.iter().sum()
    }

    pub fn peak(&self) -> u64 {
        self.peak_total
    }

    pub fn peak_of(&self, c: Component) -> u64 {
        self.peak_component[c.index()]
    }

    pub fn peak_bits(&self) -> u64 {
        self.peak_total * self.word_bits as u64
    }

    /// Start a named phase; its peak is tracked from the current total.
    pub fn begin_phase(&mut self, name: &str) {
        let t = self.total();
        self.phases.push(PhasePeak { name: String::from(name), peak_words: t });
    }

    pub fn phases(&self) -> &[PhasePeak] {
        &self.phases
    }

    fn bump(&mut self) {
        let t = self.total();
        if t > self.peak_total {
            self.peak_total = t;
        }
        for i in 0..5 {
            if self.current[i] > self.peak_component[i] {
                self.peak_component[i] = self.current[i];
            }
        }
        if let Some(p) = self.phases.last_mut() {
            if t > p.peak_words {
                p.peak_words = t;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_bits_formula() {
        assert_eq!(MemoryMeter::new(1000, 2, 64).word_bits(), 17);
        assert_eq!(MemoryMeter::new(1024, 1, 2).word_bits(), 11);
    }

    #[test]
    fn peaks_and_phases() {
        let mut m = MemoryMeter::new(10, 1, 2);
        m.begin_phase("a");
        m.set(Component::TreeBuffers, 10);
        m.set(Component::TreeBuffers, 4);
        m.begin_phase("b");
        m.add(Component::SketchAccumulators, 3);
        assert_eq!(m.total(), 7);
        assert_eq!(m.peak(), 10);
        assert_eq!(m.phases()[0].peak_words, 10);
        assert_eq!(m.phases()[1].peak_words, 7);
        assert_eq!(m.peak_of(Component::TreeBuffers), 10);
    }
}
