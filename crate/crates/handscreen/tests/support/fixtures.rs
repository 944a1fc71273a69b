use handscreen::artifact::{ArtifactMeta, ModelArtifact};
use handscreen::decode::encode_png;
use handscreen_core::{HeadParams, Label, NORMALIZATION_ID};
use prost::Message;
use tract_onnx::pb::*;

use super::synthetic;

fn dim(v: i64) -> tensor_shape_proto::Dimension {
    tensor_shape_proto::Dimension { value: Some(tensor_shape_proto::dimension::Value::DimValue(v)), ..Default::default() }
}

fn value_info(name: &str, dims: &[i64]) -> ValueInfoProto {
    let tensor = type_proto::Tensor { elem_type: 1, shape: Some(TensorShapeProto { dim: dims.iter().map(|&d| dim(d)).collect() }) };
    ValueInfoProto {
        name: name.into(),
        r#type: Some(TypeProto { value: Some(type_proto::Value::TensorType(tensor)), ..Default::default() }),
        ..Default::default()
    }
}

/// Weight `[c][j]` of the fixture projection.
pub fn fixture_weight(c: usize, j: usize) -> f32 {
    ((c * 7 + j * 13) % 17) as f32 * 0.01 - 0.08
}

/// A tiny feature extractor: per-channel spatial mean, then a fixed
/// `3 x out_dim` matrix. Input `1x224x224x3`, output `1 x out_dim`.
pub fn feature_extractor(out_dim: usize) -> Vec<u8> {
    let weights: Vec<f32> = (0..3).flat_map(|c| (0..out_dim).map(move |j| fixture_weight(c, j))).collect();
    let ints = |name: &str, v: Vec<i64>| AttributeProto {
        name: name.into(),
        r#type: attribute_proto::AttributeType::Ints as i32,
        ints: v,
        ..Default::default()
    };
    let int = |name: &str, v: i64| AttributeProto {
        name: name.into(),
        r#type: attribute_proto::AttributeType::Int as i32,
        i: v,
        ..Default::default()
    };
    let graph = GraphProto {
        name: "fixture".into(),
        node: vec![
            NodeProto {
                op_type: "ReduceMean".into(),
                input: vec!["input".into()],
                output: vec!["pooled".into()],
                attribute: vec![ints("axes", vec![1, 2]), int("keepdims", 0)],
                ..Default::default()
            },
            NodeProto {
                op_type: "MatMul".into(),
                input: vec!["pooled".into(), "w".into()],
                output: vec!["output".into()],
                ..Default::default()
            },
        ],
        initializer: vec![TensorProto {
            name: "w".into(),
            dims: vec![3, out_dim as i64],
            data_type: 1,
            float_data: weights,
            ..Default::default()
        }],
        input: vec![value_info("input", &[1, 224, 224, 3])],
        output: vec![value_info("output", &[1, out_dim as i64])],
        ..Default::default()
    };
    ModelProto {
        ir_version: 7,
        opset_import: vec![OperatorSetIdProto { domain: String::new(), version: 13 }],
        graph: Some(graph),
        ..Default::default()
    }
    .encode_to_vec()
}

pub fn page_png(label: Label, seed: u64) -> Vec<u8> {
    encode_png(&synthetic::page(label, seed))
}

/// All weights zero and the output bias set so every input maps to
/// `probability`.
pub fn constant_model(probability: f64, threshold: f64, backbone_digest: [u8; 32]) -> ModelArtifact {
    let mut params = HeadParams::zeros();
    params.layers_mut()[3].bias_mut()[0] = (probability / (1.0 - probability)).ln();
    ModelArtifact {
        params,
        meta: ArtifactMeta {
            backbone_digest,
            normalization_id: NORMALIZATION_ID.to_string(),
            dropout_rate: 0.5,
            threshold,
        },
        version: "fixture".to_string(),
    }
}
