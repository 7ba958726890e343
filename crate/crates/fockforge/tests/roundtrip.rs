use fockforge::circuit::{CircuitElement, CircuitFile, Detection, InputSpec};
use fockforge::{parse_circuit, serialize_circuit};
use proptest::prelude::*;

fn real() -> impl Strategy<Value = f64> {
    prop_oneof![
        -10.0f64..10.0,
        Just(0.0),
        Just(-0.0),
        (-1000i32..1000).prop_map(|k| f64::from(k) / 8.0)
    ]
}

fn circuit() -> impl Strategy<Value = CircuitFile> {
    (2usize..6).prop_flat_map(|n| {
        let element = prop_oneof![
            (0..n, 1..n, real(), real(), real()).prop_map(
                move |(a, d, theta, phase_t, phase_r)| CircuitElement::Bs {
                    a,
                    b: (a + d) % n,
                    theta,
                    phase_t,
                    phase_r,
                }
            ),
            (0..n, real()).prop_map(|(mode, angle)| CircuitElement::Phase { mode, angle }),
            (0..n, 1..n, real(), real(), real(), 0.0f64..1.0).prop_map(
                move |(a, d, theta, phase_t, phase_r, abs)| {
                    CircuitElement::LossyBs {
                        a,
                        b: (a + d) % n,
                        theta,
                        phase_t,
                        phase_r,
                        abs,
                    }
                }
            ),
        ];
        let input = prop_oneof![
            (0u32..5).prop_map(|k| (0u8, k, 0.0, 0.0)),
            (real(), real()).prop_map(|(re, im)| (1u8, 0, re, im)),
            (0.0f64..0.99).prop_map(|q| (2u8, 0, q, 0.0)),
        ];
        let detect = (any::<bool>(), 0u32..4, proptest::option::of(0.01f64..=1.0));
        (
            Just(n),
            proptest::collection::vec(element, 0..8),
            proptest::collection::vec(proptest::option::of(input), n),
            proptest::collection::vec(proptest::option::of(detect), n),
        )
            .prop_map(|(n, elements, ins, dets)| {
                let mut c = CircuitFile {
                    modes: n,
                    elements,
                    ..Default::default()
                };
                let mut used = vec![false; n];
                for (m, spec) in ins.into_iter().enumerate() {
                    let Some((kind, k, x, y)) = spec else {
                        continue;
                    };
                    if used[m] {
                        continue;
                    }
                    let s = match kind {
                        0 => InputSpec::Fock {
                            mode: m,
                            photons: k,
                        },
                        1 => InputSpec::Coherent {
                            mode: m,
                            re: x,
                            im: y,
                        },
                        _ => {
                            let Some(partner) = (m + 1..n).find(|&p| !used[p]) else {
                                continue;
                            };
                            used[partner] = true;
                            InputSpec::Tmsv {
                                modes: (m, partner),
                                q: x,
                            }
                        }
                    };
                    used[m] = true;
                    c.inputs.push(s);
                }
                for (m, d) in dets.into_iter().enumerate() {
                    if let Some((vacuum, k, eta)) = d {
                        c.detections.push(Detection {
                            mode: m,
                            photons: if vacuum { 0 } else { k },
                            eta,
                            vacuum,
                        });
                    }
                }
                c
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn serialized_circuits_parse_back(c in circuit()) {
        let text = serialize_circuit(&c);
        let back = parse_circuit(&text).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(serialize_circuit(&back), text);
    }

    #[test]
    fn comments_and_spacing_do_not_matter(c in circuit(), pad in "[ \t]{0,3}") {
        let text = serialize_circuit(&c);
        let noisy: String = text
            .lines()
            .map(|l| format!("{pad}{}{pad} # note\n\n", l.split(' ').collect::<Vec<_>>().join(&format!(" {pad}"))))
            .collect();
        prop_assert_eq!(serialize_circuit(&parse_circuit(&noisy).unwrap()), text);
    }
}
