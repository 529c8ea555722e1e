//! Synthetic absorbance spectra with carbonate content planted in known
//! absorption features, for end-to-end checks of the modelling stack.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::spectral::{Source, SpectralDataset, Spectrum, SpectrumKind, WavelengthGrid};

/// Carbonate-related band centres used by default.
pub const PLANTED_CENTERS_NM: [f64; 3] = [1415.0, 1908.0, 2335.0];

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSignal {
    pub n: usize,
    pub seed: u64,
    /// Gaussian feature centres, each with depth `gain · content`.
    pub centers_nm: Vec<f64>,
    pub gains: Vec<f64>,
    pub width_nm: f64,
    /// Carbonate content is drawn uniformly from `[0, max_content]`.
    pub max_content: f64,
    /// Standard deviation of white absorbance noise.
    pub noise_sd: f64,
    /// Broad bands with random depth unrelated to the content.
    pub distractors_nm: Vec<f64>,
}

impl Default for PlantedSignal {
    fn default() -> Self {
        Self {
            n: 2000,
            seed: 42,
            centers_nm: PLANTED_CENTERS_NM.to_vec(),
            gains: vec![0.010, 0.008, 0.012],
            width_nm: 12.0,
            max_content: 20.0,
            noise_sd: 3e-3,
            distractors_nm: vec![1700.0, 2100.0],
        }
    }
}

fn gaussian(nm: f64, center: f64, width: f64) -> f64 {
    (-0.5 * ((nm - center) / width).powi(2)).exp()
}

impl PlantedSignal {
    /// Absorbance dataset on the standard grid, labels in g/100g.
    pub fn generate(&self) -> Result<SpectralDataset> {
        if self.n == 0 {
            return Err(Error::EmptyInput);
        }
        if self.centers_nm.len() != self.gains.len() {
            return Err(Error::LengthMismatch { left: self.centers_nm.len(), right: self.gains.len() });
        }
        if !(self.width_nm > 0.0 && self.max_content > 0.0 && self.noise_sd >= 0.0) {
            return Err(Error::InvalidParams("width, content range and noise must be positive".into()));
        }
        let grid = WavelengthGrid::NIR;
        let wl = grid.wavelengths();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let noise = Normal::new(0.0, self.noise_sd).map_err(|e| Error::InvalidParams(e.to_string()))?;
        let mut spectra = Vec::with_capacity(self.n);
        let mut labels = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let content = rng.random_range(0.0..self.max_content);
            let offset = rng.random_range(0.2..0.6);
            let slope = rng.random_range(-1e-4..1e-4);
            let curve = rng.random_range(-5e-8..5e-8);
            let depths: Vec<f64> = self.distractors_nm.iter().map(|_| rng.random_range(0.0..0.2)).collect();
            let values = wl
                .iter()
                .map(|&nm| {
                    let x = nm - grid.start_nm;
                    let mut a = offset + slope * x + curve * x * x;
                    for (c, g) in self.centers_nm.iter().zip(&self.gains) {
                        a += g * content * gaussian(nm, *c, self.width_nm);
                    }
                    for (c, d) in self.distractors_nm.iter().zip(&depths) {
                        a += d * gaussian(nm, *c, 40.0);
                    }
                    a + noise.sample(&mut rng)
                })
                .collect();
            spectra.push(Spectrum::new(format!("SYN{:05}", i + 1), SpectrumKind::Absorbance, values));
            labels.push(content);
        }
        SpectralDataset::new(grid, Source::Local, spectra, labels)
    }
}
