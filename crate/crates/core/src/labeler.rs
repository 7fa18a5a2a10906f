//! Heuristic fingerprinting labels for function traces.
//!
//! Four rule sets cover the common stateless fingerprinting techniques:
//! canvas rendering, canvas font probing, audio-context processing, and
//! WebRTC SDP access. A function is labeled fingerprinting when any rule
//! set matches its trace in full.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::bytelog::FunctionKey;
use crate::traces::{FunctionTrace, TraceEvent};

/// Fingerprinting technique detected by one of the heuristics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Technique {
    Canvas,
    CanvasFont,
    Audio,
    #[serde(rename = "WebRTC")]
    WebRtc,
}

impl Technique {
    pub const ALL: [Technique; 4] = [
        Technique::Canvas,
        Technique::CanvasFont,
        Technique::Audio,
        Technique::WebRtc,
    ];
}

impl std::fmt::Display for Technique {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Technique::Canvas => "Canvas",
            Technique::CanvasFont => "CanvasFont",
            Technique::Audio => "Audio",
            Technique::WebRtc => "WebRTC",
        };
        f.write_str(s)
    }
}

/// Label for one function identity plus the technique(s) that triggered it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HeuristicVerdict {
    pub key: FunctionKey,
    pub is_fp: bool,
    /// Sorted; non-empty exactly when `is_fp`.
    pub techniques: Vec<Technique>,
}

const CONTEXT_2D: &[&str] = &["CanvasRenderingContext2D", "OffscreenCanvasRenderingContext2D"];
const CANVAS_ELEMENTS: &[&str] = &[
    "CanvasRenderingContext2D",
    "OffscreenCanvasRenderingContext2D",
    "HTMLCanvasElement",
    "OffscreenCanvas",
];
const AUDIO_CREATION_APIS: &[&str] = &[
    "BaseAudioContext.createOscillator",
    "BaseAudioContext.createDynamicsCompressor",
    "OfflineAudioContext.startRendering",
    "AudioNode.connect",
];

fn method_on(api: &str, interfaces: &[&str], method: &str) -> bool {
    interfaces.iter().any(|iface| {
        api.strip_prefix(iface)
            .and_then(|rest| rest.strip_prefix('.'))
            .is_some_and(|rest| rest == method)
    })
}

fn first_arg(event: &TraceEvent) -> Option<&str> {
    event.args.first().map(String::as_str)
}

/// Canvas rendering fingerprinting: text drawn and exported, with enough
/// text to carry entropy, and none of the interaction-style context calls
/// that legitimate drawing code makes.
pub fn canvas_heuristic(trace: &FunctionTrace) -> bool {
    let mut saw_fill_text = false;
    let mut saw_export = false;
    let mut long_text = false;
    for event in &trace.events {
        if method_on(&event.api, CONTEXT_2D, "fillText") {
            saw_fill_text = true;
            if first_arg(event).is_some_and(|t| t.chars().count() >= 10) {
                long_text = true;
            }
        } else if method_on(&event.api, CANVAS_ELEMENTS, "toDataURL") {
            saw_export = true;
        } else if method_on(&event.api, CONTEXT_2D, "save")
            || method_on(&event.api, CONTEXT_2D, "restore")
            || method_on(&event.api, CONTEXT_2D, "addEventListener")
        {
            return false;
        }
    }
    saw_fill_text && saw_export && long_text
}

/// Canvas font probing: repeated text measurement across many font values.
/// The call-count threshold is inclusive (at least 20); the distinct-font
/// threshold is strict (more than 20).
pub fn canvas_font_heuristic(trace: &FunctionTrace) -> bool {
    let mut measure_calls = 0usize;
    let mut fonts: HashSet<&str> = HashSet::new();
    for event in &trace.events {
        if event.api.ends_with(".measureText") {
            measure_calls += 1;
        } else if event.api.ends_with(".font.set") {
            if let Some(font) = first_arg(event) {
                fonts.insert(font);
            }
        }
    }
    measure_calls >= 20 && fonts.len() > 20
}

/// Audio-context fingerprinting: an audio graph is created or rendered, and
/// processed sample data is read back afterwards. "Afterwards" is positional:
/// the read must appear later in the trace than the earliest creation call.
pub fn audio_heuristic(trace: &FunctionTrace) -> bool {
    let first_creation = trace
        .events
        .iter()
        .position(|e| AUDIO_CREATION_APIS.contains(&e.api.as_str()));
    let Some(first_creation) = first_creation else {
        return false;
    };
    trace.events[first_creation + 1..]
        .iter()
        .any(|e| e.api == "AudioBuffer.getChannelData")
}

/// WebRTC fingerprinting: SDP generation initiated and the local description
/// (which exposes local network detail) accessed.
pub fn webrtc_heuristic(trace: &FunctionTrace) -> bool {
    let initiates = trace.events.iter().any(|e| {
        e.api == "RTCPeerConnection.createDataChannel" || e.api == "RTCPeerConnection.createOffer"
    });
    let reads_sdp = trace
        .events
        .iter()
        .any(|e| e.api == "RTCPeerConnection.setLocalDescription");
    initiates && reads_sdp
}

/// Apply every heuristic and collect the triggering techniques.
pub fn label(trace: &FunctionTrace) -> HeuristicVerdict {
    let mut techniques = Vec::new();
    if canvas_heuristic(trace) {
        techniques.push(Technique::Canvas);
    }
    if canvas_font_heuristic(trace) {
        techniques.push(Technique::CanvasFont);
    }
    if audio_heuristic(trace) {
        techniques.push(Technique::Audio);
    }
    if webrtc_heuristic(trace) {
        techniques.push(Technique::WebRtc);
    }
    HeuristicVerdict {
        key: trace.key.clone(),
        is_fp: !techniques.is_empty(),
        techniques,
    }
}

/// Label every trace in a batch.
pub fn label_all(traces: &[FunctionTrace]) -> Vec<HeuristicVerdict> {
    traces.iter().map(label).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traces::test_event;
    use proptest::prelude::*;

    fn trace(events: Vec<TraceEvent>) -> FunctionTrace {
        FunctionTrace {
            key: FunctionKey {
                script_url: "https://example.com/fpjs.js".into(),
                script_id: 3,
                function_name: "gatherFingerprint".into(),
            },
            events,
        }
    }

    fn fill_text(text: &str) -> TraceEvent {
        test_event("CanvasRenderingContext2D.fillText", &[text])
    }

    fn to_data_url() -> TraceEvent {
        test_event("HTMLCanvasElement.toDataURL", &[])
    }

    #[test]
    fn canvas_positive() {
        let t = trace(vec![fill_text("abcdefghijkl"), to_data_url()]);
        assert!(canvas_heuristic(&t));
    }

    #[test]
    fn canvas_nine_code_points_is_below_threshold() {
        // Nine code points but more than ten UTF-8 bytes: length counts
        // code points, so this stays below the threshold.
        let text = "short\u{00A0}\u{00A0}ab";
        assert_eq!(text.chars().count(), 9);
        assert!(text.len() > 10);
        let t = trace(vec![fill_text(text), to_data_url()]);
        assert!(!canvas_heuristic(&t));
    }

    #[test]
    fn canvas_ten_code_points_is_enough() {
        let t = trace(vec![fill_text("abcdefghij"), to_data_url()]);
        assert!(canvas_heuristic(&t));
    }

    #[test]
    fn canvas_save_call_disqualifies() {
        let t = trace(vec![
            fill_text("abcdefghijkl"),
            to_data_url(),
            test_event("CanvasRenderingContext2D.save", &[]),
        ]);
        assert!(!canvas_heuristic(&t));
    }

    #[test]
    fn canvas_requires_export() {
        let t = trace(vec![fill_text("abcdefghijkl")]);
        assert!(!canvas_heuristic(&t));
    }

    #[test]
    fn canvas_offscreen_variant_counts() {
        let t = trace(vec![
            test_event("OffscreenCanvasRenderingContext2D.fillText", &["abcdefghijkl"]),
            test_event("OffscreenCanvas.toDataURL", &[]),
        ]);
        assert!(canvas_heuristic(&t));
    }

    fn measure_events(n: usize) -> Vec<TraceEvent> {
        (0..n)
            .map(|_| test_event("CanvasRenderingContext2D.measureText", &["Sample"]))
            .collect()
    }

    fn font_events(n: usize) -> Vec<TraceEvent> {
        (0..n)
            .map(|i| test_event("CanvasRenderingContext2D.font.set", &[&format!("12px Font{i}")]))
            .collect()
    }

    #[test]
    fn canvas_font_thresholds() {
        let mut ev = measure_events(25);
        ev.extend(font_events(25));
        assert!(canvas_font_heuristic(&trace(ev)));

        let mut ev = measure_events(19);
        ev.extend(font_events(30));
        assert!(!canvas_font_heuristic(&trace(ev)), "19 measure calls is below 20");

        let mut ev = measure_events(25);
        ev.extend(font_events(20));
        assert!(
            !canvas_font_heuristic(&trace(ev)),
            "exactly 20 distinct fonts fails the strict threshold"
        );

        let mut ev = measure_events(20);
        ev.extend(font_events(21));
        assert!(canvas_font_heuristic(&trace(ev)));
    }

    #[test]
    fn canvas_font_distinct_values_not_calls() {
        // 30 font sets but only 5 distinct values.
        let mut ev = measure_events(25);
        for i in 0..30 {
            ev.push(test_event(
                "CanvasRenderingContext2D.font.set",
                &[&format!("12px Font{}", i % 5)],
            ));
        }
        assert!(!canvas_font_heuristic(&trace(ev)));
    }

    #[test]
    fn audio_canonical_sequence() {
        let t = trace(vec![
            test_event("BaseAudioContext.createOscillator", &[]),
            test_event("AudioNode.connect", &[]),
            test_event("OfflineAudioContext.startRendering", &[]),
            test_event("AudioBuffer.getChannelData", &["0"]),
        ]);
        assert!(audio_heuristic(&t));
    }

    #[test]
    fn audio_requires_creation_calls() {
        let t = trace(vec![test_event("AudioBuffer.getChannelData", &["0"])]);
        assert!(!audio_heuristic(&t));
    }

    #[test]
    fn audio_read_before_creation_fails() {
        let t = trace(vec![
            test_event("AudioBuffer.getChannelData", &["0"]),
            test_event("BaseAudioContext.createOscillator", &[]),
        ]);
        assert!(!audio_heuristic(&t));
    }

    #[test]
    fn webrtc_rules() {
        let offer = test_event("RTCPeerConnection.createOffer", &[]);
        let channel = test_event("RTCPeerConnection.createDataChannel", &["probe"]);
        let set_local = test_event("RTCPeerConnection.setLocalDescription", &[]);
        assert!(webrtc_heuristic(&trace(vec![offer.clone(), set_local.clone()])));
        assert!(webrtc_heuristic(&trace(vec![set_local.clone(), channel.clone()])));
        assert!(!webrtc_heuristic(&trace(vec![channel])));
        assert!(!webrtc_heuristic(&trace(vec![set_local])));
    }

    #[test]
    fn label_collects_technique_set() {
        let mut ev = vec![fill_text("abcdefghijkl"), to_data_url()];
        ev.extend([
            test_event("BaseAudioContext.createOscillator", &[]),
            test_event("AudioBuffer.getChannelData", &["0"]),
        ]);
        let verdict = label(&trace(ev));
        assert!(verdict.is_fp);
        assert_eq!(verdict.techniques, vec![Technique::Canvas, Technique::Audio]);
    }

    #[test]
    fn label_empty_trace_is_not_fp() {
        let verdict = label(&trace(vec![]));
        assert!(!verdict.is_fp);
        assert!(verdict.techniques.is_empty());
    }

    #[test]
    fn navigator_reads_alone_are_not_fp() {
        let verdict = label(&trace(vec![
            test_event("Navigator.userAgent.get", &[]),
            test_event("Navigator.platform.get", &[]),
        ]));
        assert!(!verdict.is_fp);
    }

    // Event pool for property tests: a mix of heuristic-relevant and
    // irrelevant calls.
    fn arb_event() -> impl Strategy<Value = TraceEvent> {
        prop_oneof![
            Just(test_event("CanvasRenderingContext2D.fillText", &["abcdefghijkl"])),
            Just(test_event("CanvasRenderingContext2D.fillText", &["tiny"])),
            Just(test_event("HTMLCanvasElement.toDataURL", &[])),
            Just(test_event("CanvasRenderingContext2D.measureText", &["S"])),
            (0u32..40).prop_map(|i| {
                test_event("CanvasRenderingContext2D.font.set", &[&format!("12px F{i}")])
            }),
            Just(test_event("BaseAudioContext.createOscillator", &[])),
            Just(test_event("AudioNode.connect", &[])),
            Just(test_event("AudioBuffer.getChannelData", &["0"])),
            Just(test_event("RTCPeerConnection.createOffer", &[])),
            Just(test_event("RTCPeerConnection.setLocalDescription", &[])),
            Just(test_event("Navigator.userAgent.get", &[])),
        ]
    }

    fn destructive(api: &str) -> bool {
        method_on(api, CONTEXT_2D, "save")
            || method_on(api, CONTEXT_2D, "restore")
            || method_on(api, CONTEXT_2D, "addEventListener")
    }

    proptest! {
        #[test]
        fn prop_appending_is_monotone_for_count_based_rules(
            base in prop::collection::vec(arb_event(), 0..60),
            extra in prop::collection::vec(arb_event(), 0..20),
        ) {
            let before = trace(base.clone());
            let mut grown = base;
            grown.extend(extra.iter().cloned());
            let after = trace(grown);

            prop_assert!(!(canvas_font_heuristic(&before) && !canvas_font_heuristic(&after)));
            prop_assert!(!(audio_heuristic(&before) && !audio_heuristic(&after)));
            prop_assert!(!(webrtc_heuristic(&before) && !webrtc_heuristic(&after)));
            // The appended pool contains no save/restore/addEventListener,
            // so canvas is monotone here too.
            prop_assert!(extra.iter().all(|e| !destructive(&e.api)));
            prop_assert!(!(canvas_heuristic(&before) && !canvas_heuristic(&after)));
        }

        #[test]
        fn prop_canvas_flips_only_on_destructive_calls(
            base in prop::collection::vec(arb_event(), 0..60),
        ) {
            let before = trace(base.clone());
            if canvas_heuristic(&before) {
                let mut grown = base;
                grown.push(test_event("CanvasRenderingContext2D.save", &[]));
                prop_assert!(!canvas_heuristic(&trace(grown)));
            }
        }

        #[test]
        fn prop_only_audio_is_order_sensitive(
            events in prop::collection::vec(arb_event(), 0..60),
            seed in 0u64..1000,
        ) {
            use rand::seq::SliceRandom;
            let mut shuffled = events.clone();
            let mut rng = crate::seeds::rng_for(seed, "labeler-shuffle");
            shuffled.shuffle(&mut rng);

            let a = trace(events);
            let b = trace(shuffled);
            prop_assert_eq!(canvas_heuristic(&a), canvas_heuristic(&b));
            prop_assert_eq!(canvas_font_heuristic(&a), canvas_font_heuristic(&b));
            prop_assert_eq!(webrtc_heuristic(&a), webrtc_heuristic(&b));
        }

        #[test]
        fn prop_label_matches_is_fp_invariant(events in prop::collection::vec(arb_event(), 0..60)) {
            let verdict = label(&trace(events));
            prop_assert_eq!(verdict.is_fp, !verdict.techniques.is_empty());
        }
    }
}
