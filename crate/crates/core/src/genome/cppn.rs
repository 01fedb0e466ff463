use super::{topological_order, Activation, Genome, NodeKind, INPUT_IDS, OUTPUT_ID};

/// A genome flattened for repeated evaluation. Building the substrate
/// queries one CPPN hundreds of times, so the topological order is
/// computed once here.
#[derive(Clone, Debug)]
pub struct Cppn {
    order: Vec<usize>,
    activations: Vec<Activation>,
    incoming: Vec<Vec<(usize, f64)>>,
    inputs: [usize; 4],
    output: usize,
}

impl Cppn {
    pub fn new(genome: &Genome) -> Self {
        let nodes = genome.nodes();
        let slot = |id| {
            nodes
                .binary_search_by_key(&id, |n| n.id)
                .expect("validated genome has every referenced node")
        };
        let mut incoming = vec![Vec::new(); nodes.len()];
        for c in genome.connections().iter().filter(|c| c.enabled) {
            incoming[slot(c.target)].push((slot(c.source), c.weight));
        }
        let order = topological_order(nodes, genome.connections())
            .expect("validated genome is acyclic")
            .into_iter()
            .filter(|&i| nodes[i].kind != NodeKind::Input)
            .collect();
        Self {
            order,
            activations: nodes.iter().map(|n| n.activation).collect(),
            incoming,
            inputs: INPUT_IDS.map(slot),
            output: slot(OUTPUT_ID),
        }
    }

    pub fn query(&self, x1: f64, y1: f64, x2: f64, y2: f64) -> f64 {
        let mut values = vec![0.0; self.activations.len()];
        for (slot, v) in self.inputs.iter().zip([x1, y1, x2, y2]) {
            values[*slot] = v;
        }
        for &i in &self.order {
            let sum: f64 = self.incoming[i].iter().map(|&(s, w)| values[s] * w).sum();
            values[i] = self.activations[i].apply(sum);
        }
        values[self.output]
    }
}

/// `w = CPPN(x1, y1, x2, y2)`.
pub fn query_cppn(genome: &Genome, x1: f64, y1: f64, x2: f64, y2: f64) -> f64 {
    Cppn::new(genome).query(x1, y1, x2, y2)
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::super::*;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weight_network_is_zero() {
        let g = Genome::from_parts(io_nodes(), vec![conn(0, 0, 4, 0.0)]).unwrap();
        assert_eq!(query_cppn(&g, 0.3, -0.7, 1.0, 0.2), 0.0);
    }

    #[test]
    fn pass_through_returns_x1() {
        let g = Genome::from_parts(io_nodes(), vec![conn(0, 0, 4, 1.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let q: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..=1.0));
            assert_eq!(query_cppn(&g, q[0], q[1], q[2], q[3]), q[0]);
        }
    }

    #[test]
    fn hidden_chain_evaluates_in_order() {
        let mut nodes = io_nodes();
        nodes.push(NodeGene {
            id: 5,
            activation: Activation::Tanh,
            kind: NodeKind::Hidden,
        });
        let g = Genome::from_parts(
            nodes,
            vec![conn(0, 0, 5, 2.0), conn(1, 1, 5, -1.0), conn(2, 5, 4, 3.0), conn(3, 2, 4, 0.5)],
        )
        .unwrap();
        let (x1, y1, x2): (f64, f64, f64) = (0.4, 0.1, -0.6);
        let expected = 3.0 * (2.0 * x1 - y1).tanh() + 0.5 * x2;
        assert!((query_cppn(&g, x1, y1, x2, 0.9) - expected).abs() < 1e-15);
    }

    #[test]
    fn disabling_output_inputs_gives_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut registry = InnovationRegistry::new();
        let rates = VariationRates::default();
        for _ in 0..20 {
            let g = init_genome(&mut rng, &rates, &mut registry);
            let conns: Vec<ConnectionGene> = g
                .connections()
                .iter()
                .map(|c| ConnectionGene {
                    enabled: c.enabled && c.target != OUTPUT_ID,
                    ..*c
                })
                .collect();
            let cut = Genome::from_parts(g.nodes().to_vec(), conns).unwrap();
            let cppn = Cppn::new(&cut);
            let first = cppn.query(0.0, 0.0, 0.0, 0.0);
            for _ in 0..100 {
                let q: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..=1.0));
                assert_eq!(cppn.query(q[0], q[1], q[2], q[3]), first);
            }
        }
    }

    #[test]
    fn query_is_bitwise_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut registry = InnovationRegistry::new();
        let g = init_genome(&mut rng, &VariationRates::default(), &mut registry);
        let a = query_cppn(&g, 0.25, -0.5, 0.75, 1.0);
        let b = query_cppn(&g.clone(), 0.25, -0.5, 0.75, 1.0);
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
