//! Corpus statistics, score distribution, top-k selection and the
//! score-versus-metric correlation studies, written out as CSV, SVG and a
//! JSON summary.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::corpus::{Corpus, DocPair, Document, Side};
use crate::error::{Error, Result};
use crate::metrics::{pearson, PairMetrics};
use crate::sentences::Segmenter;

pub const DEFAULT_BINS: usize = 100;
pub const DEFAULT_TOP_K: usize = 15_000;

/// External token counter for the optional token statistics.
pub trait TokenCounter: Sync {
    fn count(&self, text: &str, lang: &str) -> usize;
}

/// Raw sums for one language; averages are derived.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LanguageStats {
    pub lang: String,
    pub articles: u64,
    pub sentences: u64,
    pub characters: u64,
    pub title_chars: u64,
    pub lead_chars: u64,
    pub content_chars: u64,
    pub tokens: Option<TokenSums>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TokenSums {
    pub total: u64,
    pub title: u64,
    pub lead: u64,
    pub content: u64,
}

fn mean(sum: u64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        sum as f64 / n as f64
    }
}

impl LanguageStats {
    pub fn avg_title_chars(&self) -> f64 {
        mean(self.title_chars, self.articles)
    }

    pub fn avg_lead_chars(&self) -> f64 {
        mean(self.lead_chars, self.articles)
    }

    pub fn avg_content_chars(&self) -> f64 {
        mean(self.content_chars, self.articles)
    }

    pub fn avg_content_sentences(&self) -> f64 {
        mean(self.sentences, self.articles)
    }

    fn add(
        &mut self,
        doc: &Document,
        segmenter: &dyn Segmenter,
        tokens: Option<&dyn TokenCounter>,
    ) {
        let chars = |s: &str| s.chars().count() as u64;
        self.articles += 1;
        self.title_chars += chars(&doc.title);
        self.lead_chars += chars(&doc.lead);
        self.content_chars += chars(&doc.content);
        self.characters += chars(&doc.title) + chars(&doc.lead) + chars(&doc.content);
        self.sentences += segmenter.split(&doc.content, &doc.lang).len() as u64;
        if let Some(tc) = tokens {
            let t = self.tokens.get_or_insert_with(TokenSums::default);
            let (ti, le, co) = (
                tc.count(&doc.title, &doc.lang) as u64,
                tc.count(&doc.lead, &doc.lang) as u64,
                tc.count(&doc.content, &doc.lang) as u64,
            );
            t.title += ti;
            t.lead += le;
            t.content += co;
            t.total += ti + le + co;
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StatsTable {
    pub a: LanguageStats,
    pub b: LanguageStats,
}

/// Statistics over the documents taking part in `pairs`, each counted once.
pub fn corpus_stats(
    corpus: &Corpus,
    pairs: &[DocPair],
    segmenter: &dyn Segmenter,
    tokens: Option<&dyn TokenCounter>,
) -> Result<StatsTable> {
    let mut table = StatsTable {
        a: LanguageStats {
            lang: corpus.langs().a.clone(),
            ..Default::default()
        },
        b: LanguageStats {
            lang: corpus.langs().b.clone(),
            ..Default::default()
        },
    };
    let mut seen = HashSet::new();
    for p in pairs {
        for id in [&p.src_id, &p.tgt_id] {
            if !seen.insert(id.as_str()) {
                continue;
            }
            let doc = corpus.resolve(id)?;
            match corpus.side_of(doc) {
                Side::A => table.a.add(doc, segmenter, tokens),
                Side::B => table.b.add(doc, segmenter, tokens),
            }
        }
    }
    Ok(table)
}

/// Renders one or more named tables side by side, one statistic per row.
pub fn stats_csv(tables: &[(&str, &StatsTable)]) -> String {
    let mut out = String::from("statistic");
    for (name, t) in tables {
        let _ = write!(out, ",{name}_{},{name}_{}", t.a.lang, t.b.lang);
    }
    out.push('\n');
    type Getter = fn(&LanguageStats) -> String;
    let tok_avg = |s: &LanguageStats, f: fn(&TokenSums) -> u64| {
        s.tokens
            .as_ref()
            .map_or(String::new(), |t| format!("{:.2}", mean(f(t), s.articles)))
    };
    let rows: Vec<(&str, Getter)> = vec![
        ("articles", |s| s.articles.to_string()),
        ("sentences", |s| s.sentences.to_string()),
        ("tokens", |s| {
            s.tokens
                .as_ref()
                .map_or(String::new(), |t| t.total.to_string())
        }),
        ("characters", |s| s.characters.to_string()),
        ("avg_title_chars", |s| format!("{:.2}", s.avg_title_chars())),
        ("avg_lead_chars", |s| format!("{:.2}", s.avg_lead_chars())),
        ("avg_content_chars", |s| {
            format!("{:.2}", s.avg_content_chars())
        }),
        ("avg_content_sentences", |s| {
            format!("{:.2}", s.avg_content_sentences())
        }),
    ];
    for (name, get) in rows {
        out.push_str(name);
        for (_, t) in tables {
            let _ = write!(out, ",{},{}", get(&t.a), get(&t.b));
        }
        out.push('\n');
    }
    for (name, f) in [
        (
            "avg_title_tokens",
            (|t: &TokenSums| t.title) as fn(&TokenSums) -> u64,
        ),
        ("avg_lead_tokens", |t: &TokenSums| t.lead),
        ("avg_content_tokens", |t: &TokenSums| t.content),
    ] {
        out.push_str(name);
        for (_, t) in tables {
            let _ = write!(out, ",{},{}", tok_avg(&t.a, f), tok_avg(&t.b, f));
        }
        out.push('\n');
    }
    out
}

/// Equal-width histogram over [low, high]; the last bin is closed on the right.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Scores below `low`.
    pub below: u64,
    /// Scores above `high` (or not comparable).
    pub above: u64,
}

impl Histogram {
    pub fn low(&self) -> f64 {
        self.bin_edges[0]
    }

    pub fn high(&self) -> f64 {
        *self.bin_edges.last().unwrap()
    }

    pub fn overflow(&self) -> u64 {
        self.below + self.above
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.overflow()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin,low,high,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            let _ = writeln!(
                out,
                "{i},{:.4},{:.4},{c}",
                self.bin_edges[i],
                self.bin_edges[i + 1]
            );
        }
        let _ = writeln!(out, "below,,{:.4},{}", self.low(), self.below);
        let _ = writeln!(out, "above,{:.4},,{}", self.high(), self.above);
        out
    }
}

pub fn score_histogram(scores: &[f64], bins: usize, low: f64, high: f64) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::InvalidArgument(
            "histogram needs at least one bin".into(),
        ));
    }
    // also rejects NaN bounds
    if low.partial_cmp(&high) != Some(std::cmp::Ordering::Less) {
        return Err(Error::InvalidArgument(format!(
            "histogram range [{low}, {high}] is empty"
        )));
    }
    let width = (high - low) / bins as f64;
    let mut bin_edges: Vec<f64> = (0..bins).map(|i| low + i as f64 * width).collect();
    bin_edges.push(high);
    let mut h = Histogram {
        bin_edges,
        counts: vec![0; bins],
        below: 0,
        above: 0,
    };
    for &s in scores {
        if s < low {
            h.below += 1;
        } else if s <= high {
            let idx = (((s - low) / width).floor() as usize).min(bins - 1);
            h.counts[idx] += 1;
        } else {
            h.above += 1;
        }
    }
    Ok(h)
}

/// Highest-scoring `k` pairs; ties ordered by (src_id, tgt_id).
pub fn top_k(pairs: &[DocPair], k: usize) -> Vec<DocPair> {
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.src_id.cmp(&b.src_id))
            .then_with(|| a.tgt_id.cmp(&b.tgt_id))
    });
    sorted.truncate(k);
    sorted
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Correlation {
    pub r: Option<f64>,
    pub n: usize,
    #[serde(skip)]
    pub observations: Vec<(f64, f64)>,
}

/// Pearson r between document scores and a per-pair metric. Pairs with an
/// undefined metric are dropped first.
pub fn metric_correlation(doc_scores: &[f64], metric_values: &[Option<f64>]) -> Correlation {
    let observations: Vec<(f64, f64)> = doc_scores
        .iter()
        .zip(metric_values)
        .filter_map(|(&s, m)| m.map(|m| (s, m)))
        .collect();
    let (x, y): (Vec<f64>, Vec<f64>) = observations.iter().copied().unzip();
    Correlation {
        r: pearson(&x, &y),
        n: observations.len(),
        observations,
    }
}

// ---------------------------------------------------------------------------
// SVG

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 50.0;

fn svg_open(title: &str, x_label: &str, y_label: &str) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n\
         <line x1=\"{PAD}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
         <line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{}\" stroke=\"black\"/>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n\
         <text x=\"15\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 15 {})\">{}</text>\n",
        W / 2.0,
        xml_escape(title),
        H - PAD,
        W - PAD,
        H - PAD,
        H - PAD,
        W / 2.0,
        H - 12.0,
        xml_escape(x_label),
        H / 2.0,
        H / 2.0,
        xml_escape(y_label),
    );
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn axis_ticks(s: &mut String, x_range: (f64, f64), y_range: (f64, f64)) {
    let sx = |x: f64| PAD + (x - x_range.0) / (x_range.1 - x_range.0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y_range.0) / (y_range.1 - y_range.0) * (H - 2.0 * PAD);
    for k in 0..=4 {
        let x = x_range.0 + (x_range.1 - x_range.0) * k as f64 / 4.0;
        let y = y_range.0 + (y_range.1 - y_range.0) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{x:.1}</text>",
            sx(x),
            H - PAD + 15.0
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{y:.2}</text>",
            PAD - 4.0,
            sy(y) + 4.0
        );
    }
}

/// Bar chart of a histogram, with an optional dashed vertical line at `cutoff`.
pub fn histogram_svg(h: &Histogram, cutoff: Option<f64>) -> String {
    let mut s = svg_open("Document score distribution", "score", "pairs");
    let max = h.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let (lo, hi) = (h.low(), h.high());
    axis_ticks(&mut s, (lo, hi), (0.0, max));
    let bw = (W - 2.0 * PAD) / h.counts.len() as f64;
    for (i, &c) in h.counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let bh = c as f64 / max * (H - 2.0 * PAD);
        let _ = writeln!(
            s,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"steelblue\"/>",
            PAD + i as f64 * bw,
            H - PAD - bh,
            bw,
            bh
        );
    }
    if let Some(c) = cutoff.filter(|c| (lo..=hi).contains(c)) {
        let x = PAD + (c - lo) / (hi - lo) * (W - 2.0 * PAD);
        let _ = writeln!(
            s,
            "<line x1=\"{x:.2}\" y1=\"{PAD}\" x2=\"{x:.2}\" y2=\"{}\" stroke=\"red\" stroke-dasharray=\"6,4\"/>",
            H - PAD
        );
    }
    s.push_str("</svg>\n");
    s
}

pub struct ScatterSeries<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub points: &'a [(f64, f64)],
    pub r: Option<f64>,
}

pub fn scatter_svg(title: &str, y_label: &str, series: &[ScatterSeries<'_>]) -> String {
    let mut s = svg_open(title, "document score", y_label);
    let all = series.iter().flat_map(|se| se.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x0 > x1 {
        (x0, x1, y0, y1) = (0.0, 100.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-9 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-9 {
        y1 = y0 + 1.0;
    }
    axis_ticks(&mut s, (x0, x1), (y0, y1));
    for (k, se) in series.iter().enumerate() {
        for &(x, y) in se.points {
            let _ = writeln!(
                s,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{}\" fill-opacity=\"0.6\"/>",
                PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD),
                H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD),
                se.color
            );
        }
        let r = se.r.map_or("undefined".to_string(), |r| format!("{r:.3}"));
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{}\">{}: r = {r}</text>",
            W - PAD - 140.0,
            PAD + 15.0 * k as f64,
            se.color,
            xml_escape(se.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

// ---------------------------------------------------------------------------
// Report directory

pub struct ReportInputs<'a> {
    pub corpus: &'a Corpus,
    /// All cleaned document alignments.
    pub pairs: &'a [DocPair],
    pub metrics: &'a [PairMetrics],
    pub segmenter: &'a dyn Segmenter,
    pub tokens: Option<&'a dyn TokenCounter>,
    pub top_k: usize,
    pub histogram_low: f64,
    pub histogram_high: f64,
    pub bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportSummary {
    pub aligned_pairs: usize,
    pub top_k: usize,
    pub top_k_selected: usize,
    pub top_k_min_score: Option<f64>,
    pub mean_score: Option<f64>,
    pub histogram_low: f64,
    pub histogram_high: f64,
    pub histogram_overflow: u64,
    pub metric_pairs: usize,
    pub correlations: BTreeMap<String, Correlation>,
    pub stats_full: StatsTable,
    pub stats_top_k: StatsTable,
    pub tokens_counted: bool,
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))
}

fn opt(x: Option<f64>) -> String {
    x.map_or(String::new(), |v| format!("{v:.6}"))
}

/// Writes `stats.csv`, `histogram.csv`, the three scatter CSVs, their SVG
/// figures and `summary.json` into `dir`. Returns the names written.
pub fn write_report(dir: &Path, inputs: &ReportInputs<'_>) -> Result<(ReportSummary, Vec<String>)> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let langs = inputs.corpus.langs();
    let mut files = Vec::new();

    let top = top_k(inputs.pairs, inputs.top_k);
    let full_stats = corpus_stats(inputs.corpus, inputs.pairs, inputs.segmenter, inputs.tokens)?;
    let top_stats = corpus_stats(inputs.corpus, &top, inputs.segmenter, inputs.tokens)?;
    write(
        dir,
        "stats.csv",
        &stats_csv(&[("full", &full_stats), ("top", &top_stats)]),
    )?;
    files.push("stats.csv".to_string());

    let scores: Vec<f64> = inputs.pairs.iter().map(|p| p.score).collect();
    let hist = score_histogram(
        &scores,
        inputs.bins,
        inputs.histogram_low,
        inputs.histogram_high,
    )?;
    let cutoff = (top.len() < inputs.pairs.len())
        .then(|| top.last().map(|p| p.score))
        .flatten();
    write(dir, "histogram.csv", &hist.to_csv())?;
    write(dir, "histogram.svg", &histogram_svg(&hist, cutoff))?;
    files.extend(["histogram.csv".to_string(), "histogram.svg".to_string()]);

    let m = inputs.metrics;
    let doc_scores: Vec<f64> = m.iter().map(|p| p.score).collect();
    let col = |f: fn(&PairMetrics) -> Option<f64>| m.iter().map(f).collect::<Vec<_>>();
    let ratio_a = metric_correlation(&doc_scores, &col(|p| p.align_ratio_src));
    let ratio_b = metric_correlation(&doc_scores, &col(|p| p.align_ratio_tgt));
    let length = metric_correlation(&doc_scores, &col(|p| p.length_corr));
    let mono = metric_correlation(&doc_scores, &col(|p| p.monotonicity));

    let mut csv = format!(
        "src_id,tgt_id,score,align_ratio_{},align_ratio_{}\n",
        langs.a, langs.b
    );
    for p in m {
        let _ = writeln!(
            csv,
            "{},{},{:.4},{},{}",
            crate::similarity::csv_field(&p.src_id),
            crate::similarity::csv_field(&p.tgt_id),
            p.score,
            opt(p.align_ratio_src),
            opt(p.align_ratio_tgt)
        );
    }
    write(dir, "scatter_alignratio.csv", &csv)?;
    for (name, f) in [
        (
            "lengthcorr",
            (|p: &PairMetrics| p.length_corr) as fn(&PairMetrics) -> Option<f64>,
        ),
        ("monotonicity", |p: &PairMetrics| p.monotonicity),
    ] {
        let mut csv = format!("src_id,tgt_id,score,{name}\n");
        for p in m {
            let _ = writeln!(
                csv,
                "{},{},{:.4},{}",
                crate::similarity::csv_field(&p.src_id),
                crate::similarity::csv_field(&p.tgt_id),
                p.score,
                opt(f(p))
            );
        }
        write(dir, &format!("scatter_{name}.csv"), &csv)?;
    }
    files.extend(
        [
            "scatter_alignratio.csv",
            "scatter_lengthcorr.csv",
            "scatter_monotonicity.csv",
        ]
        .map(String::from),
    );

    write(
        dir,
        "scatter_alignratio.svg",
        &scatter_svg(
            "Document score vs. aligned sentence ratio",
            "AlignRatio",
            &[
                ScatterSeries {
                    label: &langs.a,
                    color: "darkorange",
                    points: &ratio_a.observations,
                    r: ratio_a.r,
                },
                ScatterSeries {
                    label: &langs.b,
                    color: "steelblue",
                    points: &ratio_b.observations,
                    r: ratio_b.r,
                },
            ],
        ),
    )?;
    write(
        dir,
        "scatter_lengthcorr.svg",
        &scatter_svg(
            "Document score vs. sentence length correlation",
            "length correlation",
            &[ScatterSeries {
                label: "all",
                color: "seagreen",
                points: &length.observations,
                r: length.r,
            }],
        ),
    )?;
    write(
        dir,
        "scatter_monotonicity.svg",
        &scatter_svg(
            "Document score vs. monotonicity",
            "monotonicity",
            &[ScatterSeries {
                label: "all",
                color: "purple",
                points: &mono.observations,
                r: mono.r,
            }],
        ),
    )?;
    files.extend(
        [
            "scatter_alignratio.svg",
            "scatter_lengthcorr.svg",
            "scatter_monotonicity.svg",
        ]
        .map(String::from),
    );

    let mut correlations = BTreeMap::new();
    correlations.insert(format!("align_ratio_{}", langs.a), ratio_a);
    correlations.insert(format!("align_ratio_{}", langs.b), ratio_b);
    correlations.insert("length_corr".to_string(), length);
    correlations.insert("monotonicity".to_string(), mono);
    let mean_score = (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64);
    let summary = ReportSummary {
        aligned_pairs: inputs.pairs.len(),
        top_k: inputs.top_k,
        top_k_selected: top.len(),
        top_k_min_score: top.last().map(|p| p.score),
        mean_score: mean_score.map(crate::align::round4),
        histogram_low: inputs.histogram_low,
        histogram_high: inputs.histogram_high,
        histogram_overflow: hist.overflow(),
        metric_pairs: m.len(),
        correlations: correlations
            .into_iter()
            .map(|(k, mut c)| {
                c.r = c.r.map(|r| (r * 1e6).round() / 1e6);
                (k, c)
            })
            .collect(),
        stats_full: full_stats,
        stats_top_k: top_stats,
        tokens_counted: inputs.tokens.is_some(),
    };
    write(
        dir,
        "summary.json",
        &(serde_json::to_string_pretty(&summary)? + "\n"),
    )?;
    files.push("summary.json".to_string());
    Ok((summary, files))
}
