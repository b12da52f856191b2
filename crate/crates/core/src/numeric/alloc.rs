use super::matrix::Matrix;

/// Running total of transient working-buffer bytes.
///
/// Only buffers requested through [`AllocMeter::buffer`] or
/// [`AllocMeter::scratch`] are counted: attention score slabs and sampled-score
/// slabs. Model weights, inputs and outputs are not. The count only grows
/// until [`AllocMeter::reset`].
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct AllocMeter {
    transient_bytes: u64,
}

impl AllocMeter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge(&mut self, bytes: usize) {
        self.transient_bytes += bytes as u64;
    }

    /// Zeroed `f64` buffer of `len` elements, charged in full.
    pub fn buffer(&mut self, len: usize) -> Vec<f64> {
        self.charge(len * std::mem::size_of::<f64>());
        vec![0.0; len]
    }

    pub fn scratch(&mut self, rows: usize, cols: usize) -> Matrix {
        let m = Matrix::zeros(rows, cols);
        self.charge(m.byte_len());
        m
    }

    pub fn transient_bytes(&self) -> u64 {
        self.transient_bytes
    }

    pub fn reset(&mut self) {
        self.transient_bytes = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_accumulate_until_reset() {
        let mut meter = AllocMeter::new();
        let b = meter.buffer(10);
        assert_eq!(b.len(), 10);
        assert_eq!(meter.transient_bytes(), 80);
        meter.scratch(2, 3);
        assert_eq!(meter.transient_bytes(), 128);
        meter.charge(0);
        assert_eq!(meter.transient_bytes(), 128);
        meter.reset();
        assert_eq!(meter.transient_bytes(), 0);
    }
}
