//! Random PathML documents shared by the integration tests.

#![allow(dead_code)]

use std::collections::BTreeMap;

use pathfuse_core::pathml::{
    Layer, PathMLDocument, PathPoint, ProcessParameters, ProcessType, Track,
};
use proptest::prelude::*;

pub fn point() -> impl Strategy<Value = PathPoint> {
    (
        prop::array::uniform3(-1500.0..1500.0f64),
        prop::array::uniform3(-180.0..180.0f64),
        0.0..800.0f64,
    )
        .prop_map(|(p, r, v)| PathPoint {
            x: p[0],
            y: p[1],
            z: p[2],
            rx: r[0],
            ry: r[1],
            rz: r[2],
            velocity: v,
        })
}

pub fn name() -> impl Strategy<Value = String> {
    "[A-Za-z0-9&<>äß][A-Za-z0-9 &<>\"'äßé_.-]{0,15}"
}

fn track(j: usize) -> impl Strategy<Value = Track> {
    (
        prop::collection::vec(point(), 2..8),
        any::<bool>(),
        prop::option::of(name()),
    )
        .prop_map(move |(points, tool_active, label)| Track {
            // Index suffix keeps names unique within the layer.
            name: match label {
                Some(l) => format!("{l} #{j}"),
                None => format!("Track_{j}"),
            },
            points,
            tool_active,
        })
}

fn layer(i: usize) -> impl Strategy<Value = Layer> {
    (1usize..4).prop_flat_map(move |n| {
        let tracks: Vec<_> = (0..n).map(track).collect();
        tracks.prop_map(move |tracks| Layer {
            name: format!("Layer_{i}"),
            index: i,
            tracks,
        })
    })
}

pub fn process() -> impl Strategy<Value = ProcessParameters> {
    (
        prop_oneof![
            Just(ProcessType::Adhesive),
            Just(ProcessType::Welding),
            Just(ProcessType::Other)
        ],
        prop::option::of(0.0..100.0f64),
        prop::option::of(0.0..100.0f64),
        prop::option::of(0.1..10.0f64),
        prop::collection::btree_map("[A-Za-z][A-Za-z0-9_]{0,10}", "[ -~äé\n\t]{0,20}", 0..4),
    )
        .prop_map(|(process_type, glue, wire, height, extra)| {
            let mut p = ProcessParameters {
                process_type,
                glue_flow_rate: glue,
                wire_feed_rate: wire,
                layer_height: height,
                extra: extra
                    .into_iter()
                    .filter(|(k, _)| {
                        !matches!(
                            k.as_str(),
                            "ProcessType"
                                | "GlueFlowRate_ml_min"
                                | "WireFeedRate_mm_s"
                                | "LayerHeight_mm"
                        )
                    })
                    .collect::<BTreeMap<_, _>>(),
            };
            match process_type {
                ProcessType::Adhesive => {
                    p.glue_flow_rate.get_or_insert(12.0);
                }
                ProcessType::Welding => {
                    p.wire_feed_rate.get_or_insert(8.0);
                }
                ProcessType::Other => {}
            }
            p
        })
}

pub fn document() -> impl Strategy<Value = PathMLDocument> {
    (name(), process(), 1usize..4).prop_flat_map(|(project_name, process, n)| {
        let layers: Vec<_> = (0..n).map(layer).collect();
        layers.prop_map(move |layers| PathMLDocument {
            project_name: project_name.clone(),
            process: process.clone(),
            layers,
        })
    })
}

/// Single-layer document with a layer height, ready for expansion.
pub fn single_layer_document() -> impl Strategy<Value = PathMLDocument> {
    (document(), 0.1..10.0f64).prop_map(|(mut d, h)| {
        d.layers.truncate(1);
        d.process.layer_height = Some(h);
        d
    })
}
