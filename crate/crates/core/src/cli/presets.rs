//! Built-in synthetic acquisition campaigns.

use super::config::{Preset, SyntheticData, SyntheticPath};
use crate::signals::{SecondaryPacket, SyntheticStateSpec, ToneBurstSpec};

/// Wave packets, echo lag and noise shared by all states of a path; damage
/// level `k` adds an echo of gain `k · gain_step`.
struct PathModel {
    path_id: &'static str,
    delay_s: f64,
    attenuation: f64,
    scatter_delay_s: f64,
    gain_step: f64,
    noise_std: f64,
    secondary: SecondaryPacket,
}

impl PathModel {
    fn states(&self, levels: usize, gains: Option<&[f64]>) -> SyntheticPath {
        let states = (0..=levels)
            .map(|k| SyntheticStateSpec {
                state_label: if k == 0 { "healthy".into() } else { format!("damage-{k}") },
                delay_s: self.delay_s,
                attenuation: self.attenuation,
                scatter_gain: match gains {
                    Some(g) if k > 0 => g[k - 1] * self.gain_step,
                    _ => k as f64 * self.gain_step,
                },
                scatter_delay_s: self.scatter_delay_s,
                noise_std: self.noise_std,
                secondary: Some(self.secondary),
            })
            .collect();
        SyntheticPath {
            path_id: self.path_id.into(),
            states,
        }
    }
}

pub fn preset(p: Preset) -> SyntheticData {
    match p {
        Preset::Aluminum => SyntheticData {
            burst: ToneBurstSpec::default(),
            acquisition_rate: 24e6,
            acquisition_length: 7344,
            downsample: 12,
            realizations: 20,
            paths: vec![
                PathModel {
                    path_id: "2-6",
                    delay_s: 60e-6,
                    attenuation: 0.02,
                    scatter_delay_s: 6e-6,
                    gain_step: 0.004,
                    noise_std: 0.001,
                    secondary: SecondaryPacket {
                        center_frequency: 120e3,
                        delay_s: 110e-6,
                        attenuation: 0.015,
                    },
                }
                .states(4, None),
                PathModel {
                    path_id: "1-4",
                    delay_s: 45e-6,
                    attenuation: 0.025,
                    scatter_delay_s: 6e-6,
                    gain_step: 0.002,
                    noise_std: 0.001,
                    secondary: SecondaryPacket {
                        center_frequency: 120e3,
                        delay_s: 90e-6,
                        attenuation: 0.02,
                    },
                }
                .states(4, None),
            ],
        },
        // the two heaviest damage levels sit close together, so they are
        // expected to be confused with one another
        Preset::Composite => SyntheticData {
            burst: ToneBurstSpec::default(),
            acquisition_rate: 24e6,
            acquisition_length: 7344,
            downsample: 12,
            realizations: 20,
            paths: vec![
                PathModel {
                    path_id: "3-4",
                    delay_s: 70e-6,
                    attenuation: 0.01,
                    scatter_delay_s: 5e-6,
                    gain_step: 0.0015,
                    noise_std: 0.01,
                    secondary: SecondaryPacket {
                        center_frequency: 120e3,
                        delay_s: 120e-6,
                        attenuation: 0.008,
                    },
                }
                .states(6, Some(&[1.0, 2.0, 3.0, 4.0, 5.0, 5.02])),
                PathModel {
                    path_id: "1-4",
                    delay_s: 50e-6,
                    attenuation: 0.015,
                    scatter_delay_s: 5e-6,
                    gain_step: 0.0015,
                    noise_std: 0.01,
                    secondary: SecondaryPacket {
                        center_frequency: 120e3,
                        delay_s: 100e-6,
                        attenuation: 0.012,
                    },
                }
                .states(6, Some(&[1.0, 2.0, 3.0, 4.0, 5.0, 5.02])),
            ],
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aluminum_shape() {
        let d = preset(Preset::Aluminum);
        assert_eq!(d.acquisition_length / d.downsample, 612);
        assert_eq!(d.acquisition_rate / d.downsample as f64, 2e6);
        assert!(d.paths.iter().all(|p| p.states.len() == 5));
    }

    #[test]
    fn composite_has_seven_states() {
        let d = preset(Preset::Composite);
        assert!(d.paths.iter().all(|p| p.states.len() == 7));
        assert_eq!(d.paths[0].states[6].state_label, "damage-6");
    }
}
