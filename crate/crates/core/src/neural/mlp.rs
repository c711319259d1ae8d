use std::io::{BufRead, Write};

use rand::Rng as _;

use crate::{Error, Result, Rng};

/// Width of both hidden layers of the standard network.
pub const HIDDEN_WIDTH: usize = 20;

/// Fully connected network with rectifier hidden layers and a linear output.
///
/// Parameters live in one flat vector, layer by layer, each layer stored as
/// its weight matrix (output-major) followed by its bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    widths: Vec<usize>,
    params: Vec<f64>,
}

/// Pre-activations of every layer for one input, kept for backprop.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    activations: Vec<Vec<f64>>,
    pre_activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("at least one layer")
    }
}

fn param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// `input → 20 → 20 → output`, weights uniform in `±1/√fan_in`, zero biases.
    pub fn new(input: usize, output: usize, rng: &mut Rng) -> Mlp {
        Mlp::with_widths(&[input, HIDDEN_WIDTH, HIDDEN_WIDTH, output], rng)
            .expect("standard widths are valid")
    }

    pub fn with_widths(widths: &[usize], rng: &mut Rng) -> Result<Mlp> {
        let mut net = Mlp::zeros(widths)?;
        let mut offset = 0;
        for w in widths.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for p in &mut net.params[offset..offset + w[0] * w[1]] {
                *p = rng.random_range(-bound..bound);
            }
            offset += w[0] * w[1] + w[1];
        }
        Ok(net)
    }

    pub fn zeros(widths: &[usize]) -> Result<Mlp> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::Shape(format!("invalid layer widths {widths:?}")));
        }
        Ok(Mlp {
            widths: widths.to_vec(),
            params: vec![0.0; param_count(widths)],
        })
    }

    pub fn from_params(widths: &[usize], params: Vec<f64>) -> Result<Mlp> {
        let mut net = Mlp::zeros(widths)?;
        if params.len() != net.params.len() {
            return Err(Error::Shape(format!(
                "{} parameters for widths {widths:?} (need {})",
                params.len(),
                net.params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.widths[0] {
            return Err(Error::Shape(format!(
                "input of length {} for a network expecting {}",
                input.len(),
                self.widths[0]
            )));
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(input)?.activations.pop().unwrap())
    }

    pub fn forward_cached(&self, input: &[f64]) -> Result<ForwardCache> {
        self.check_input(input)?;
        let layers = self.widths.len() - 1;
        let mut activations = Vec::with_capacity(layers + 1);
        let mut pre_activations = Vec::with_capacity(layers);
        activations.push(input.to_vec());
        let mut offset = 0;
        for (l, w) in self.widths.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + n_in * n_out];
            let bias = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let x = &activations[l];
            let z: Vec<f64> = (0..n_out)
                .map(|o| {
                    bias[o]
                        + weights[o * n_in..(o + 1) * n_in]
                            .iter()
                            .zip(x)
                            .map(|(a, b)| a * b)
                            .sum::<f64>()
                })
                .collect();
            let a = if l + 1 < layers {
                z.iter().map(|&v| v.max(0.0)).collect()
            } else {
                z.clone()
            };
            pre_activations.push(z);
            activations.push(a);
            offset += n_in * n_out + n_out;
        }
        Ok(ForwardCache {
            activations,
            pre_activations,
        })
    }

    /// Reverse-mode gradient of `⟨cotangent, f(input)⟩` with respect to the
    /// parameters, added into `grads`.
    pub fn accumulate_gradients(
        &self,
        cache: &ForwardCache,
        cotangent: &[f64],
        grads: &mut [f64],
    ) -> Result<()> {
        if cotangent.len() != self.output_width() || grads.len() != self.params.len() {
            return Err(Error::Shape(format!(
                "cotangent of length {} / gradient buffer of length {}",
                cotangent.len(),
                grads.len()
            )));
        }
        let layers = self.widths.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut offset = 0;
        for w in self.widths.windows(2) {
            offsets.push(offset);
            offset += w[0] * w[1] + w[1];
        }
        let mut upstream = cotangent.to_vec();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            let z = &cache.pre_activations[l];
            let dz: Vec<f64> = if l + 1 < layers {
                upstream
                    .iter()
                    .zip(z)
                    .map(|(&g, &v)| if v > 0.0 { g } else { 0.0 })
                    .collect()
            } else {
                upstream
            };
            let x = &cache.activations[l];
            let off = offsets[l];
            for o in 0..n_out {
                if dz[o] == 0.0 {
                    continue;
                }
                let row = &mut grads[off + o * n_in..off + (o + 1) * n_in];
                for (g, &xi) in row.iter_mut().zip(x) {
                    *g += dz[o] * xi;
                }
                grads[off + n_in * n_out + o] += dz[o];
            }
            if l > 0 {
                let weights = &self.params[off..off + n_in * n_out];
                let mut next = vec![0.0; n_in];
                for o in 0..n_out {
                    if dz[o] == 0.0 {
                        continue;
                    }
                    for (n, &w) in next.iter_mut().zip(&weights[o * n_in..(o + 1) * n_in]) {
                        *n += dz[o] * w;
                    }
                }
                upstream = next;
            } else {
                upstream = Vec::new();
            }
        }
        Ok(())
    }

    /// Gradient of `⟨cotangent, f(input)⟩` for a single input.
    pub fn gradients(&self, input: &[f64], cotangent: &[f64]) -> Result<Vec<f64>> {
        let cache = self.forward_cached(input)?;
        let mut grads = vec![0.0; self.params.len()];
        self.accumulate_gradients(&cache, cotangent, &mut grads)?;
        Ok(grads)
    }

    /// Text snapshot: a `mlp <layers>` line, the widths, then one parameter
    /// per line in shortest round-trip form.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "mlp {}", self.widths.len())?;
        let widths: Vec<String> = self.widths.iter().map(usize::to_string).collect();
        writeln!(w, "{}", widths.join(" "))?;
        for p in &self.params {
            writeln!(w, "{p:?}")?;
        }
        Ok(())
    }

    pub fn read_snapshot<R: BufRead>(r: R) -> Result<Mlp> {
        let mut lines = r.lines();
        let mut next_line = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::Parse("truncated snapshot".into()))?
                .map_err(Error::from)
        };
        let header = next_line()?;
        let count: usize = header
            .strip_prefix("mlp ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad snapshot header {header:?}")))?;
        let widths: Vec<usize> = next_line()?
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| Error::Parse(format!("bad width {s:?}"))))
            .collect::<Result<_>>()?;
        if widths.len() != count {
            return Err(Error::Parse(format!(
                "header announces {count} widths, found {}",
                widths.len()
            )));
        }
        let n = param_count(&widths);
        let mut params = Vec::with_capacity(n);
        for _ in 0..n {
            let line = next_line()?;
            params.push(
                line.trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad parameter {line:?}")))?,
            );
        }
        Mlp::from_params(&widths, params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::zeros(&[4, 20, 20, 3]).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn positive_single_path_scales_input() {
        // 1 → 1 → 1 → 1 with weights 2, 3, 0.5 and zero biases
        let net = Mlp::from_params(&[1, 1, 1, 1], vec![2.0, 0.0, 3.0, 0.0, 0.5, 0.0]).unwrap();
        for x in [0.1, 1.0, 7.5] {
            assert!((net.forward(&[x]).unwrap()[0] - 3.0 * x).abs() < 1e-15);
        }
    }

    #[test]
    fn standard_shape_and_param_count() {
        let mut rng = rng_from_seed(0);
        let net = Mlp::new(25, 4, &mut rng);
        assert_eq!(net.widths(), &[25, 20, 20, 4]);
        assert_eq!(net.params().len(), 25 * 20 + 20 + 20 * 20 + 20 + 20 * 4 + 4);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut rng = rng_from_seed(0);
        let net = Mlp::new(3, 2, &mut rng);
        assert!(net.forward(&[1.0]).is_err());
        assert!(net.gradients(&[1.0, 2.0, 3.0], &[1.0]).is_err());
    }

    #[test]
    fn zero_cotangent_gives_zero_gradient() {
        let mut rng = rng_from_seed(1);
        let net = Mlp::new(3, 2, &mut rng);
        let g = net.gradients(&[0.3, -0.2, 0.9], &[0.0, 0.0]).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dead_rectifier_blocks_gradient() {
        // hidden unit pre-activation is -1 for input 1: nothing flows to the first layer
        let net = Mlp::from_params(&[1, 1, 1], vec![-1.0, 0.0, 2.0, 0.0]).unwrap();
        let g = net.gradients(&[1.0], &[1.0]).unwrap();
        assert_eq!(&g[..2], &[0.0, 0.0]);
        assert_eq!(g[2], 0.0); // output weight sees a zero activation
        assert_eq!(g[3], 1.0); // output bias
    }

    #[test]
    fn snapshot_round_trip_is_exact() {
        let mut rng = rng_from_seed(3);
        let net = Mlp::new(25, 4, &mut rng);
        let mut buf = Vec::new();
        net.write_snapshot(&mut buf).unwrap();
        let back = Mlp::read_snapshot(&buf[..]).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn truncated_snapshot_is_rejected() {
        assert!(Mlp::read_snapshot("mlp 2\n1 1\n0.5\n".as_bytes()).is_err());
        assert!(Mlp::read_snapshot("net 2\n1 1\n".as_bytes()).is_err());
    }
}
