//! Randomized persistence properties: every valid value survives a
//! serialize/parse cycle, and no mangled byte stream ever panics the
//! parsers; they must fail with a typed error instead.

use proptest::prelude::*;

use preictal_core::deepnet::{
    network_from_bytes, network_to_bytes, AutoencoderLayer, InputScaler, SoftmaxHead,
    StackedNetwork,
};
use preictal_core::dimred::{
    pipeline_from_bytes, pipeline_to_bytes, BinMat, DimredPipeline, IicaState, PcaModel,
};
use preictal_core::mat::Mat;
use preictal_core::signal::{segment_from_bytes, segment_to_bytes, EegSegment, Label};

fn finite_f32() -> impl Strategy<Value = f32> {
    prop::num::f32::NORMAL | prop::num::f32::ZERO | prop::num::f32::SUBNORMAL
}

fn finite_f64() -> impl Strategy<Value = f64> {
    prop::num::f64::NORMAL | prop::num::f64::ZERO
}

fn label_strategy() -> impl Strategy<Value = Label> {
    prop_oneof![Just(Label::Interictal), Just(Label::Preictal), Just(Label::Unlabeled)]
}

fn segment_strategy() -> impl Strategy<Value = EegSegment> {
    (1usize..5, 1usize..40, "[a-zA-Z0-9_-]{0,12}", "[a-zA-Z0-9_-]{0,12}", label_strategy())
        .prop_flat_map(|(c, t, patient, segment, label)| {
            (
                prop::collection::vec(finite_f32(), c * t),
                (1.0f64..6000.0),
                Just((c, t, patient, segment, label)),
            )
        })
        .prop_map(|(values, rate, (c, t, patient, segment, label))| EegSegment {
            patient_id: patient,
            segment_id: segment,
            label,
            sampling_rate_hz: rate,
            data: Mat::from_vec(c, t, values),
        })
}

fn matrix_strategy(rows: usize, cols: usize) -> impl Strategy<Value = Mat<f64>> {
    prop::collection::vec(finite_f64(), rows * cols)
        .prop_map(move |v| Mat::from_vec(rows, cols, v))
}

fn pipeline_strategy() -> impl Strategy<Value = DimredPipeline<f64>> {
    (2usize..5, 1usize..3, 4usize..10).prop_flat_map(|(d, k, n)| {
        let m = 1..=k;
        (
            matrix_strategy(k, d),
            prop::collection::vec(finite_f64(), d),
            prop::collection::vec(0.1f64..4.0, k),
            matrix_strategy(k, k),
            matrix_strategy(k, n),
            prop::collection::vec(prop::bool::ANY, k * n),
            prop::collection::vec(0.01f64..0.99, k),
            m,
            Just((d, k, n)),
        )
            .prop_map(|(proj, mean, eig, g, x_src, mask, pi, m, (d, k, n))| {
                let mut z = BinMat::zeros(k, n);
                for (i, &on) in mask.iter().enumerate() {
                    if on {
                        z.set(i / n, i % n, true);
                    }
                }
                DimredPipeline {
                    pca: PcaModel {
                        d_in: d,
                        p_out: k,
                        mean,
                        eigenvalues: eig,
                        projection_w: proj,
                    },
                    iica: IicaState {
                        k_trunc: k,
                        n,
                        g,
                        x_src,
                        z,
                        pi,
                        sigma_e2: 0.01,
                        alpha: 2.0,
                    },
                    m_out: m,
                    source_order: (0..k).collect(),
                }
            })
    })
}

fn network_strategy() -> impl Strategy<Value = StackedNetwork<f64>> {
    (2usize..6, 1usize..4).prop_flat_map(|(d, h)| {
        (
            matrix_strategy(h, d),
            prop::collection::vec(finite_f64(), h),
            matrix_strategy(d, h),
            prop::collection::vec(finite_f64(), d),
            matrix_strategy(2, h),
            prop::collection::vec(finite_f64(), 2),
            finite_f64(),
            finite_f64(),
        )
            .prop_map(|(w_enc, b_enc, w_dec, b_dec, w, b, gain, offset)| StackedNetwork {
                scaler: InputScaler { gain, offset },
                layers: vec![AutoencoderLayer { w_enc, b_enc, w_dec, b_dec }],
                head: SoftmaxHead { w, b },
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn segments_survive_serialization(seg in segment_strategy()) {
        let bytes = segment_to_bytes(&seg).unwrap();
        let back = segment_from_bytes(&bytes).unwrap();
        prop_assert_eq!(seg, back);
    }

    #[test]
    fn truncated_segments_error_instead_of_panicking(
        seg in segment_strategy(),
        cut in 0usize..200,
    ) {
        let bytes = segment_to_bytes(&seg).unwrap();
        let cut = cut.min(bytes.len().saturating_sub(1));
        prop_assert!(segment_from_bytes(&bytes[..cut]).is_err());
    }

    #[test]
    fn corrupt_segment_bytes_never_panic(
        seg in segment_strategy(),
        pos in 0usize..1000,
        bit in 0u8..8,
    ) {
        let mut bytes = segment_to_bytes(&seg).unwrap();
        let pos = pos % bytes.len();
        bytes[pos] ^= 1 << bit;
        // Flips in the payload region still parse (just different floats);
        // flips in the header must error, never panic.
        let _ = segment_from_bytes(&bytes);
    }

    #[test]
    fn pipelines_survive_serialization(
        pipe in pipeline_strategy(),
        echo in "[ -~]{0,60}",
    ) {
        let bytes = pipeline_to_bytes(&pipe, &echo);
        let (back, echo_back) = pipeline_from_bytes::<f64>(&bytes).unwrap();
        prop_assert_eq!(pipe, back);
        prop_assert_eq!(echo, echo_back);
    }

    #[test]
    fn truncated_pipelines_error_instead_of_panicking(
        pipe in pipeline_strategy(),
        cut in 0usize..400,
    ) {
        let bytes = pipeline_to_bytes(&pipe, "echo");
        let cut = cut.min(bytes.len().saturating_sub(1));
        prop_assert!(pipeline_from_bytes::<f64>(&bytes[..cut]).is_err());
    }

    #[test]
    fn networks_survive_serialization(
        net in network_strategy(),
        echo in "[ -~]{0,60}",
    ) {
        let bytes = network_to_bytes(&net, &echo);
        let (back, echo_back) = network_from_bytes::<f64>(&bytes).unwrap();
        prop_assert_eq!(net, back);
        prop_assert_eq!(echo, echo_back);
    }

    #[test]
    fn truncated_networks_error_instead_of_panicking(
        net in network_strategy(),
        cut in 0usize..400,
    ) {
        let bytes = network_to_bytes(&net, "echo");
        let cut = cut.min(bytes.len().saturating_sub(1));
        prop_assert!(network_from_bytes::<f64>(&bytes[..cut]).is_err());
    }
}
