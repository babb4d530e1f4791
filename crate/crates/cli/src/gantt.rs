//! SVG Gantt charts of simulation traces.
//!
//! One lane per core. Each execution interval is a `rect` with class `exec`
//! and `data-task`, `data-job`, `data-start`, `data-end` attributes. Releases
//! are upward ticks, deadlines downward ticks, misses red crosses.

use std::fmt::Write;

use mcsched_core::engine::{EventKind, Trace};
use mcsched_core::model::TaskSet;

const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const LANE: f64 = 60.0;
const BAR: f64 = 28.0;
const AXIS: f64 = 30.0;
/// Approximate advance of one monospace glyph at font-size 11.
const LABEL_CHAR: f64 = 6.7;

const PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#edc948", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac",
];

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Pixels per tick: about 1000 px for the whole horizon, within [0.5, 40].
fn scale(horizon: u64) -> f64 {
    (1000.0 / horizon.max(1) as f64).clamp(0.5, 40.0)
}

/// Axis label spacing in ticks: the smallest of 1, 2, 5, 10, 20, 50, ...
/// that leaves at least 40 px between labels.
fn label_step(px_per_tick: f64) -> u64 {
    let mut decade = 1u64;
    loop {
        for m in [1, 2, 5] {
            if (m * decade) as f64 * px_per_tick >= 40.0 {
                return m * decade;
            }
        }
        decade *= 10;
    }
}

pub fn render(trace: &Trace, tasks: &TaskSet) -> String {
    let k = scale(trace.horizon);
    let x = |t: u64| LEFT + t as f64 * k;
    let lane_y = |core: usize| TOP + core as f64 * LANE;
    let width = x(trace.horizon) + RIGHT;
    let height = lane_y(trace.cores) + AXIS;
    let color = |id: &str| PALETTE[tasks.position(id).unwrap_or(0) % PALETTE.len()];

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.2}" height="{height:.2}" viewBox="0 0 {width:.2} {height:.2}" font-family="monospace" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{width:.2}" height="{height:.2}" fill="white"/>"#
    );

    for core in 0..trace.cores {
        let y = lane_y(core);
        let base = y + LANE - 12.0;
        let _ = writeln!(
            s,
            r#"<text x="8" y="{:.2}">core {core}</text>"#,
            base - BAR / 2.0 + 4.0
        );
        let _ = writeln!(
            s,
            r#"<line class="lane" x1="{LEFT:.2}" y1="{base:.2}" x2="{:.2}" y2="{base:.2}" stroke="gray"/>"#,
            x(trace.horizon)
        );
    }

    for seg in trace.segments() {
        let y = lane_y(seg.core) + LANE - 12.0 - BAR;
        let (x0, w) = (x(seg.start), (seg.end - seg.start) as f64 * k);
        let id = escape(&seg.task_id);
        let _ = writeln!(
            s,
            r#"<rect class="exec" data-task="{id}" data-job="{}" data-start="{}" data-end="{}" x="{x0:.2}" y="{y:.2}" width="{w:.2}" height="{BAR:.2}" fill="{}" stroke="black" stroke-width="0.5"><title>{id}#{} [{}, {})</title></rect>"#,
            seg.job,
            seg.start,
            seg.end,
            color(&seg.task_id),
            seg.job,
            seg.start,
            seg.end
        );
        // the <title> always carries the id; visible text only where it fits
        if w >= LABEL_CHAR * seg.task_id.chars().count() as f64 + 4.0 {
            let _ = writeln!(
                s,
                r#"<text class="label" x="{:.2}" y="{:.2}" text-anchor="middle">{id}</text>"#,
                x0 + w / 2.0,
                y + BAR / 2.0 + 4.0
            );
        }
    }

    for e in &trace.events {
        let Some(job) = &e.job else { continue };
        let base = lane_y(e.core) + LANE - 12.0;
        let top = base - BAR - 8.0;
        match e.kind {
            EventKind::Release => {
                let (xr, c) = (x(e.time), color(&job.task_id));
                let _ = writeln!(
                    s,
                    r#"<path class="release" data-task="{}" d="M{xr:.2} {base:.2} V{top:.2} l-3 5 m3 -5 l3 5" stroke="{c}" fill="none"/>"#,
                    escape(&job.task_id)
                );
                if job.abs_deadline <= trace.horizon {
                    let xd = x(job.abs_deadline);
                    let _ = writeln!(
                        s,
                        r#"<path class="deadline" data-task="{}" d="M{xd:.2} {top:.2} V{base:.2} l-3 -5 m3 5 l3 -5" stroke="{c}" fill="none"/>"#,
                        escape(&job.task_id)
                    );
                }
            }
            EventKind::DeadlineMiss => {
                let xm = x(e.time);
                let ym = top - 4.0;
                let _ = writeln!(
                    s,
                    r#"<path class="miss" data-task="{}" d="M{:.2} {:.2} l8 8 m0 -8 l-8 8" stroke="red" stroke-width="2"/>"#,
                    escape(&job.task_id),
                    xm - 4.0,
                    ym - 4.0
                );
            }
            _ => {}
        }
    }

    let axis_y = lane_y(trace.cores) + 4.0;
    let step = label_step(k);
    let mut t = 0;
    while t <= trace.horizon {
        let _ = writeln!(
            s,
            r#"<text class="tick" x="{:.2}" y="{:.2}" text-anchor="middle">{t}</text>"#,
            x(t),
            axis_y + 12.0
        );
        t += step;
    }
    s.push_str("</svg>\n");
    s
}
