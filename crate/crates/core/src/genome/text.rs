//! Line-oriented genome records:
//!
//! ```text
//! node <id> <input|hidden|output> <activation>
//! conn <innovation> <source> <target> <weight> <0|1>
//! ```
//!
//! Nodes come first, then connections. Weights use Rust's shortest
//! round-trip float formatting.

use std::fmt::Write;

use super::{Activation, ConnectionGene, Genome, GenomeError, NodeGene, NodeKind};

pub(super) fn write_genome(g: &Genome) -> String {
    let mut out = String::new();
    for n in g.nodes() {
        writeln!(out, "node {} {} {}", n.id, n.kind.name(), n.activation.name()).unwrap();
    }
    for c in g.connections() {
        writeln!(
            out,
            "conn {} {} {} {} {}",
            c.innovation,
            c.source,
            c.target,
            c.weight,
            u8::from(c.enabled)
        )
        .unwrap();
    }
    out
}

fn field<'a, T: std::str::FromStr>(
    parts: &[&'a str],
    idx: usize,
    line: usize,
    what: &str,
) -> Result<T, GenomeError> {
    parts
        .get(idx)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| GenomeError::Parse {
            line,
            message: format!("bad or missing {what}"),
        })
}

/// Parse a genome record. Blank lines and `#` comments are ignored; line
/// numbers in errors are 1-based.
pub fn parse_genome(text: &str) -> Result<Genome, GenomeError> {
    let mut nodes = Vec::new();
    let mut connections = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let parts: Vec<&str> = raw.split_whitespace().collect();
        match parts.first() {
            None => continue,
            Some(s) if s.starts_with('#') => continue,
            Some(&"node") => {
                if parts.len() != 4 {
                    return Err(GenomeError::Parse {
                        line,
                        message: "node record needs 3 fields".into(),
                    });
                }
                let id = field(&parts, 1, line, "node id")?;
                let kind = NodeKind::from_name(parts[2]).ok_or_else(|| GenomeError::Parse {
                    line,
                    message: format!("unknown node kind `{}`", parts[2]),
                })?;
                let activation =
                    Activation::from_name(parts[3]).ok_or_else(|| GenomeError::Parse {
                        line,
                        message: format!("unknown activation `{}`", parts[3]),
                    })?;
                nodes.push(NodeGene { id, activation, kind });
            }
            Some(&"conn") => {
                if parts.len() != 6 {
                    return Err(GenomeError::Parse {
                        line,
                        message: "conn record needs 5 fields".into(),
                    });
                }
                let enabled: u8 = field(&parts, 5, line, "enabled flag")?;
                if enabled > 1 {
                    return Err(GenomeError::Parse {
                        line,
                        message: "enabled flag must be 0 or 1".into(),
                    });
                }
                connections.push(ConnectionGene {
                    innovation: field(&parts, 1, line, "innovation")?,
                    source: field(&parts, 2, line, "source")?,
                    target: field(&parts, 3, line, "target")?,
                    weight: field(&parts, 4, line, "weight")?,
                    enabled: enabled == 1,
                });
            }
            Some(other) => {
                return Err(GenomeError::Parse {
                    line,
                    message: format!("unknown record `{other}`"),
                })
            }
        }
    }
    Genome::from_parts(nodes, connections)
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn format_is_stable() {
        let g = Genome::from_parts(
            super::super::test_support::io_nodes(),
            vec![super::super::test_support::conn(3, 1, 4, -0.25)],
        )
        .unwrap();
        assert_eq!(
            g.to_text(),
            "node 0 input identity\nnode 1 input identity\nnode 2 input identity\n\
             node 3 input identity\nnode 4 output identity\nconn 3 1 4 -0.25 1\n"
        );
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_genome("node 0 input identity\nnode 1 input wobble\n").unwrap_err();
        assert_eq!(
            err,
            GenomeError::Parse {
                line: 2,
                message: "unknown activation `wobble`".into()
            }
        );
        assert!(matches!(
            parse_genome("edge 1 2\n"),
            Err(GenomeError::Parse { line: 1, .. })
        ));
    }

    proptest! {
        #[test]
        fn text_round_trip(seed in any::<u64>(), steps in 0usize..20) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut registry = InnovationRegistry::new();
            let rates = VariationRates {
                add_connection_prob: 0.5,
                add_node_prob: 0.5,
                ..VariationRates::default()
            };
            let mut g = init_genome(&mut rng, &rates, &mut registry);
            for _ in 0..steps {
                g = mutate(&g, &mut rng, &rates, &mut registry);
            }
            prop_assert_eq!(parse_genome(&g.to_text()).unwrap(), g);
        }
    }
}
