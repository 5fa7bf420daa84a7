//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs without the libtest harness so the lines always
//! print.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use cadas_core::evaluation::{accuracy, cohen_kappa, ConfusionMatrix, AGREEMENT_FOOTNOTE};
use cadas_core::grading::{cin_to_sil, wknn_vote, Normalizer, TrainingSet, MIN_SQUARED_DISTANCE};
use cadas_core::model::{ClassLabel, Grade, Papilla, Point, SepImage, SilGrade};
use cadas_core::morphometrics::{build_feature_vector, compute_cell_metrics, Feature, FeatureVector, MorphometricsParams};
use cadas_core::overlap::{distance_transform, ellipse_axes, pixel_moments, resolve_cells, CellEllipse, OverlapParams};
use cadas_core::pipeline::{self, Config, FeatureCache, Manifest, ManifestEntry};
use cadas_core::segmentation::{grid_interval, slic_superpixels, BinaryMask, SlicParams};
use cadas_core::synth::{generate, SynthSpec};
use cadas_core::{model::serialize_annotation, pipeline::io, EpithelialRegion, ExactRatio, MembraneAnnotation};
use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// pinned tolerances
const METRIC_TOL: f64 = 1e-4;
const KAPPA_ORACLE_TOL: f64 = 1e-6;
const CENTER_TOL_PX: f64 = 2.0;
const TWO_CELL_MIN_CASES: usize = 95;
/// Round-off allowance on EM log-likelihood steps, relative to |LL|.
const LL_REL_TOL: f64 = 1e-9;
const FEATURE_REL_TOL: f64 = 0.05;
const PLI_MAX_DEG: f64 = 5.0;
const E2E_MIN_ACCURACY: f64 = 0.80;
const E2E_MIN_OFF_BY_ONE: f64 = 0.95;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn main() {
    let criteria: [(&str, Option<Duration>, fn() -> Outcome); 9] = [
        ("metric reproduction", Some(Duration::from_secs(1)), metric_reproduction),
        ("agreement reproduction", Some(Duration::from_secs(1)), agreement_reproduction),
        ("distance-transform exactness", Some(Duration::from_secs(30)), distance_transform_exactness),
        ("overlap-resolution oracle", Some(Duration::from_secs(60)), overlap_resolution_oracle),
        ("SLIC sanity", Some(Duration::from_secs(30)), slic_sanity),
        ("feature correctness", None, feature_correctness),
        ("w-kNN oracle equivalence", Some(Duration::from_secs(10)), wknn_oracle_equivalence),
        ("end-to-end synthetic grading", Some(Duration::from_secs(600)), end_to_end_grading),
        ("determinism", None, determinism),
    ];
    let mut failed = 0;
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let el = t.elapsed();
        let in_time = budget.is_none_or(|b| el < b);
        let pass = res.pass && in_time;
        failed += usize::from(!pass);
        let limit = budget.map(|b| format!(" < {}s", b.as_secs())).unwrap_or_default();
        println!(
            "criterion {}: {} [{name}] {} ({:.2}s{limit})",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            res.detail,
            el.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn matrix<L: ClassLabel>(rows: &[&[u64]]) -> ConfusionMatrix<L> {
    ConfusionMatrix::from_counts(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
}

// ---------------------------------------------------------------------------

fn metric_reproduction() -> Outcome {
    let cin: ConfusionMatrix<Grade> = matrix(&[&[386, 61, 17, 7], &[116, 91, 19, 14], &[13, 30, 47, 17], &[4, 15, 18, 102]]);
    let sil: ConfusionMatrix<SilGrade> = matrix(&[&[381, 57, 33], &[106, 91, 43], &[16, 27, 203]]);
    let a_cin: f64 = accuracy(&cin).unwrap();
    let a_sil: f64 = accuracy(&sil).unwrap();
    let a_cin_exact: ExactRatio = accuracy(&cin).unwrap();

    // class counts collapse through the label map
    let counts = [471u64, 240, 107, 139];
    let mut sil_counts = [0u64; 3];
    for (g, n) in Grade::ALL.iter().zip(counts) {
        sil_counts[cin_to_sil(*g).index()] += n;
    }
    let ok = (a_cin - 0.6541).abs() <= METRIC_TOL
        && (a_sil - 0.7053).abs() <= METRIC_TOL
        && a_cin_exact == Ratio::new(626, 957)
        && cin.col_totals() == vec![519, 197, 101, 140]
        && sil_counts == [471, 240, 246];
    outcome(ok, format!("CIN acc {a_cin:.4}, SIL acc {a_sil:.4}, SIL counts {sil_counts:?}"))
}

/// Kappa by enumerating every (rater 1, rater 2) sample pair: chance
/// agreement is the share of all n² cross pairs whose labels coincide.
fn brute_force_kappa(pairs: &[(usize, usize)]) -> f64 {
    let n = pairs.len() as f64;
    let observed = pairs.iter().filter(|(a, b)| a == b).count() as f64 / n;
    let mut coincide = 0u64;
    for &(a, _) in pairs {
        for &(_, b) in pairs {
            coincide += u64::from(a == b);
        }
    }
    let expected = coincide as f64 / (n * n);
    (observed - expected) / (1.0 - expected)
}

fn expand(counts: &[&[u64]]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, row) in counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            out.extend(std::iter::repeat_n((i, j), c as usize));
        }
    }
    out
}

fn dual_manifest(pairs: &[(usize, usize)]) -> Manifest {
    Manifest {
        entries: pairs
            .iter()
            .enumerate()
            .map(|(n, &(a, b))| ManifestEntry {
                sep_id: format!("s{n}"),
                image: "x.png".into(),
                annotation: "x.json".into(),
                label: Some(Grade::ALL[a]),
                label2: Some(Grade::ALL[b]),
            })
            .collect(),
    }
}

fn agreement_reproduction() -> Outcome {
    let raters: &[&[u64]] = &[&[354, 37, 0, 0], &[88, 156, 8, 0], &[13, 52, 71, 15], &[4, 9, 22, 128]];
    let pairs = expand(raters);
    let report = pipeline::rater_agreement(&dual_manifest(&pairs), "acceptance").unwrap();
    let oracle = brute_force_kappa(&pairs);
    let exact = cohen_kappa::<Ratio<i128>, Grade>(&matrix(raters)).unwrap();

    // first pathologist against the final diagnosis, collapsed to SIL
    let p1: &[&[u64]] = &[&[377, 74, 18, 2], &[13, 176, 37, 14], &[0, 2, 87, 18], &[1, 0, 9, 129]];
    let fd = pipeline::rater_agreement(&dual_manifest(&expand(p1)), "acceptance").unwrap();
    let sil_published: Vec<Vec<u64>> = vec![vec![377, 74, 20], vec![13, 176, 51], vec![1, 2, 243]];

    let text = report.to_text();
    let ok = report.pairs == 957
        && report.cin.counts.iter().enumerate().map(|(i, r)| r[i]).sum::<u64>() == 709
        && (report.cin.accuracy - 709.0 / 957.0).abs() < 1e-12
        && (report.cin.kappa - oracle).abs() <= KAPPA_ORACLE_TOL
        && exact.expected == Ratio::new(282_037, 915_849)
        && (oracle - 0.626).abs() < 1e-3
        && fd.sil.counts == sil_published
        && text.contains(AGREEMENT_FOOTNOTE);
    outcome(
        ok,
        format!(
            "agreement {}/957 = {:.4}, kappa {:.6} vs oracle {:.6}, SIL diagonal {:?}",
            report.cin.counts.iter().enumerate().map(|(i, r)| r[i]).sum::<u64>(),
            report.cin.accuracy,
            report.cin.kappa,
            oracle,
            (0..3).map(|i| fd.sil.counts[i][i]).collect::<Vec<_>>()
        ),
    )
}

// ---------------------------------------------------------------------------

/// Squared distance to the nearest background pixel by scanning every
/// background pixel, with the one-pixel ring outside the image included.
fn brute_force_edt(m: &BinaryMask) -> Vec<u64> {
    let (w, h) = (m.width() as i64, m.height() as i64);
    let mut bg = Vec::new();
    for y in -1..=h {
        for x in -1..=w {
            let inside = x >= 0 && y >= 0 && x < w && y < h;
            if !inside || !m.get(x as u32, y as u32) {
                bg.push((x, y));
            }
        }
    }
    let mut out = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            let d = bg.iter().map(|&(bx, by)| ((bx - x).pow(2) + (by - y).pow(2)) as u64).min().unwrap();
            out.push(d);
        }
    }
    out
}

fn distance_transform_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0d7);
    let mut mismatched = 0;
    for _ in 0..500 {
        let (w, h) = (rng.random_range(1..=64u32), rng.random_range(1..=64u32));
        let density = rng.random_range(0.5..0.995);
        let bits = (0..w * h).map(|_| rng.random_bool(density)).collect();
        let m = BinaryMask::from_bits(w, h, bits);
        let d = distance_transform::<f64>(&m);
        if d.squared() != brute_force_edt(&m).as_slice() {
            mismatched += 1;
        }
    }
    outcome(mismatched == 0, format!("{mismatched}/500 masks differ from exhaustive search"))
}

// ---------------------------------------------------------------------------

fn overlap_resolution_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x2d15c);
    let params = OverlapParams::default();
    let (mut two, mut centred, mut ll_bad, mut runs) = (0, 0, 0, 0);
    let r2 = 100.0;
    for _ in 0..100 {
        let s = rng.random_range(12.0..=16.0);
        let phi = rng.random_range(0.0..std::f64::consts::PI);
        let (ox, oy) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
        let c1 = (32.0 + ox - 0.5 * s * phi.cos(), 32.0 + oy - 0.5 * s * phi.sin());
        let c2 = (c1.0 + s * phi.cos(), c1.1 + s * phi.sin());
        let inside = |x: u32, y: u32, c: (f64, f64)| (x as f64 - c.0).powi(2) + (y as f64 - c.1).powi(2) <= r2;
        let m = BinaryMask::from_fn(64, 64, |x, y| inside(x, y, c1) || inside(x, y, c2));
        let res = resolve_cells::<f64>(&m, &params).unwrap();
        for rep in &res.components {
            if rep.em_log_likelihood.is_empty() {
                continue;
            }
            runs += 1;
            let scale = rep.em_log_likelihood[0].abs();
            let step_down = rep
                .em_log_likelihood
                .windows(2)
                .enumerate()
                .any(|(i, w)| !rep.em_restarts.contains(&(i + 1)) && w[1] < w[0] - LL_REL_TOL * scale);
            ll_bad += usize::from(step_down);
        }
        if res.cells.len() == 2 {
            two += 1;
            let d = |c: &CellEllipse<f64>, t: (f64, f64)| ((c.cx - t.0).powi(2) + (c.cy - t.1).powi(2)).sqrt();
            let (a, b) = (&res.cells[0], &res.cells[1]);
            let direct = d(a, c1).max(d(b, c2));
            let swapped = d(a, c2).max(d(b, c1));
            centred += usize::from(direct.min(swapped) <= CENTER_TOL_PX);
        }
    }
    outcome(
        two >= TWO_CELL_MIN_CASES && centred == two && ll_bad == 0 && runs > 0,
        format!("{two}/100 split in two, {centred} within {CENTER_TOL_PX}px, {ll_bad}/{runs} EM runs with a likelihood drop"),
    )
}

// ---------------------------------------------------------------------------

fn noise_image(w: u32, h: u32, seed: u64) -> image::RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    image::RgbImage::from_fn(w, h, |_, _| image::Rgb([rng.random(), rng.random(), rng.random()]))
}

fn slic_sanity() -> Outcome {
    let n: f64 = grid_interval(600, 500, 3000);
    let img = noise_image(600, 500, 5);
    let sp = slic_superpixels::<f64>(&img, &SlicParams::default()).unwrap();
    let labelled = sp.labels.len() == 600 * 500 && sp.labels.iter().all(|&l| (l as usize) < sp.len());
    let sizes_match = {
        let mut counts = vec![0usize; sp.len()];
        sp.labels.iter().for_each(|&l| counts[l as usize] += 1);
        counts.iter().zip(&sp.centers).all(|(c, s)| *c == s.size && *c > 0)
    };

    let small = noise_image(40, 30, 6);
    let singles = slic_superpixels::<f64>(&small, &SlicParams { k: 1200, ..SlicParams::default() }).unwrap();
    let mut seen = vec![false; singles.len()];
    singles.labels.iter().for_each(|&l| seen[l as usize] = true);
    let singleton = singles.len() == 1200 && seen.iter().all(|&s| s) && singles.centers.iter().all(|c| c.size == 1);

    outcome(
        n == 10.0 && labelled && sizes_match && sp.len() <= 3000 && singleton,
        format!("N = {n}, {} superpixels for k = 3000, k = pixel count gives {} singletons", sp.len(), singles.len()),
    )
}

// ---------------------------------------------------------------------------

fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1e-12)
}

fn cell_from_pixels(mut pixels: Vec<(u32, u32)>) -> CellEllipse<f64> {
    pixels.sort_unstable_by_key(|&(x, y)| (y, x));
    let (mean, cov) = pixel_moments::<f64>(&pixels).unwrap();
    let (a, b, t) = ellipse_axes(&cov, 2.0).unwrap();
    CellEllipse {
        cx: mean[0],
        cy: mean[1],
        semi_major: a,
        semi_minor: b,
        orientation: t,
        weight: 1.0,
        pixel_count: pixels.len(),
        pixels,
    }
}

fn same_bits(a: &FeatureVector<f64>, b: &FeatureVector<f64>) -> bool {
    a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits()) && a.region_valid == b.region_valid
}

fn feature_correctness() -> Outcome {
    let params = MorphometricsParams::default();
    let cfg = Config::default();
    let (mut worst_truth, mut worst_pipeline) = (0.0f64, 0.0f64);
    let (mut perm_ok, mut trans_ok) = (true, true);
    for g in Grade::ALL {
        for seed in 0..5 {
            let s = generate(&SynthSpec::new(g, 100 + seed)).unwrap();
            let mask = BinaryMask::new(s.sep.width(), s.sep.height());
            let cells = s.resolved_cells();
            let fv = build_feature_vector(&s.sep, &s.annotation, &cells, &mask, &params).unwrap();
            let piped = pipeline::analyze(&s.sep, &s.annotation, &cfg).unwrap().features;
            for r in EpithelialRegion::ALL {
                let e = &s.expected[r.index()];
                for (f, want) in [(Feature::Ana, e.ana), (Feature::Aca, e.aca), (Feature::Ncr, e.ncr)] {
                    worst_truth = worst_truth.max(rel_err(fv.get(r, f), want));
                    worst_pipeline = worst_pipeline.max(rel_err(piped.get(r, f), want));
                }
            }

            let mut shuffled = cells.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            perm_ok &= same_bits(&fv, &build_feature_vector(&s.sep, &s.annotation, &shuffled, &mask, &params).unwrap());

            let (dx, dy) = (37u32, 23u32);
            let (w, h) = (s.sep.width() + 2 * dx, s.sep.height() + 2 * dy);
            let mut canvas = image::RgbImage::from_pixel(w, h, image::Rgb([230, 210, 220]));
            image::imageops::replace(&mut canvas, s.sep.image(), i64::from(dx), i64::from(dy));
            let moved_sep = SepImage::new(s.sep.id(), canvas).unwrap();
            let moved_ann = s.annotation.translated(f64::from(dx), f64::from(dy));
            let moved_cells: Vec<_> = s
                .cells
                .iter()
                .map(|c| cell_from_pixels(c.pixels.iter().map(|&(x, y)| (x + dx, y + dy)).collect()))
                .collect();
            let moved = build_feature_vector(&moved_sep, &moved_ann, &moved_cells, &BinaryMask::new(w, h), &params).unwrap();
            trans_ok &= same_bits(&fv, &moved);
        }
    }

    // every nucleus painted a single flat colour
    let s = generate(&SynthSpec::new(Grade::Cin3, 7)).unwrap();
    let mut img = s.sep.image().clone();
    for (i, c) in s.cells.iter().enumerate() {
        let tone = image::Rgb([40 + (i % 90) as u8, 20, 90]);
        c.pixels.iter().for_each(|&(x, y)| img.put_pixel(x, y, tone));
    }
    let flat = SepImage::new("flat", img).unwrap();
    let cells = s.resolved_cells();
    let flat_fv = build_feature_vector(&flat, &s.annotation, &cells, &BinaryMask::new(flat.width(), flat.height()), &params).unwrap();
    let hi_zero = cells
        .iter()
        .all(|c| compute_cell_metrics(c, &flat, &s.annotation).unwrap().hyperchromasia == 0.0)
        && EpithelialRegion::ALL.iter().all(|&r| flat_fv.get(r, Feature::Hi) == 0.0);

    // nuclei drawn parallel to the membrane
    let mut worst_pli = 0.0f64;
    for seed in 0..5 {
        let spec = SynthSpec {
            orientation_jitter_deg: 0.0,
            overlap_fraction: 0.0,
            ..SynthSpec::new(Grade::Normal, 200 + seed)
        };
        let s = generate(&spec).unwrap();
        for c in s.resolved_cells() {
            let m = compute_cell_metrics(&c, &s.sep, &s.annotation).unwrap();
            if !m.excluded {
                worst_pli = worst_pli.max(m.polarity_angle);
            }
        }
    }
    worst_pli = worst_pli.max(hand_drawn_pli());

    let pass = worst_truth <= FEATURE_REL_TOL
        && worst_pipeline <= FEATURE_REL_TOL
        && hi_zero
        && worst_pli <= PLI_MAX_DEG
        && perm_ok
        && trans_ok;
    outcome(
        pass,
        format!(
            "ANA/ACA/NCR worst rel. error {:.2}% from true cells, {:.2}% through the pipeline; flat HI = 0: {hi_zero}; \
             worst PLI {worst_pli:.2} deg; permutation {perm_ok}, translation {trans_ok}",
            100.0 * worst_truth,
            100.0 * worst_pipeline
        ),
    )
}

/// Axis-parallel ellipses against a straight basal membrane.
fn hand_drawn_pli() -> f64 {
    let ann = MembraneAnnotation {
        basal: vec![Point::new(0.0, 90.0), Point::new(119.0, 90.0)],
        upper: vec![Point::new(0.0, 5.0), Point::new(119.0, 5.0)],
        papillae: Vec::<Papilla>::new(),
    };
    let sep = SepImage::new("axis", noise_image(120, 96, 9)).unwrap();
    let mut worst = 0.0f64;
    for (i, (a, b)) in [(8.0, 5.0), (8.5, 6.0), (10.0, 4.0), (9.0, 6.2)].into_iter().enumerate() {
        let (cx, cy) = (20.3 + 25.0 * i as f64, 30.6 + 10.1 * i as f64);
        let pixels: Vec<(u32, u32)> = (0..96u32)
            .flat_map(|y| (0..120u32).map(move |x| (x, y)))
            .filter(|&(x, y)| ((x as f64 - cx) / a).powi(2) + ((y as f64 - cy) / b).powi(2) <= 1.0)
            .collect();
        let m = compute_cell_metrics(&cell_from_pixels(pixels), &sep, &ann).unwrap();
        worst = worst.max(m.polarity_angle);
    }
    worst
}

// ---------------------------------------------------------------------------

/// Independent weighted vote: full sort, exact-match rule, ties to the more
/// severe class.
fn oracle_vote(z: &[f64], train: &[Vec<f64>], labels: &[Grade], k: usize) -> (Grade, bool) {
    let mut d: Vec<(f64, usize)> = train
        .iter()
        .enumerate()
        .map(|(i, v)| (v.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum(), i))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut votes = [0.0f64; 4];
    let exact = d.iter().take_while(|(x, _)| *x == 0.0).count();
    if exact > 0 {
        d[..exact].iter().for_each(|&(_, i)| votes[labels[i].index()] += 1.0);
    } else {
        d[..k].iter().for_each(|&(x, i)| votes[labels[i].index()] += 1.0 / x.max(MIN_SQUARED_DISTANCE));
    }
    let mut best = 0;
    for i in 0..4 {
        if votes[i] >= votes[best] {
            best = i;
        }
    }
    (Grade::ALL[best], exact > 0)
}

/// Independent vote in exact rationals on integer-valued vectors.
fn rational_vote(z: &[i64], train: &[Vec<i64>], labels: &[Grade], k: usize) -> (Grade, bool) {
    let mut d: Vec<(i64, usize)> = train
        .iter()
        .enumerate()
        .map(|(i, v)| (v.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum(), i))
        .collect();
    d.sort();
    let zero = Ratio::<i128>::from_integer(0);
    let mut votes = [zero; 4];
    let exact = d.iter().take_while(|(x, _)| *x == 0).count();
    if exact > 0 {
        d[..exact].iter().for_each(|&(_, i)| votes[labels[i].index()] += 1);
    } else {
        d[..k].iter().for_each(|&(x, i)| votes[labels[i].index()] += Ratio::new(1, i128::from(x)));
    }
    let mut best = 0;
    for i in 0..4 {
        if votes[i] >= votes[best] {
            best = i;
        }
    }
    (Grade::ALL[best], exact > 0)
}

fn wknn_oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x4b);
    let mut mismatches = 0;
    let (mut exact_hits, mut ties) = (0, 0);

    // continuous features, fitted normalizer
    let raw: Vec<[f64; 21]> = (0..500).map(|_| std::array::from_fn(|j| rng.random_range(0.0..(j + 1) as f64))).collect();
    let labels: Vec<Grade> = (0..500).map(|_| Grade::ALL[rng.random_range(0..4)]).collect();
    let t = TrainingSet::fit(&raw, labels.clone()).unwrap();
    let norm = oracle_normalize(&raw);
    for q in 0..200 {
        let k = 1 + q % 9;
        let query: [f64; 21] = if q % 10 == 0 {
            raw[q]
        } else {
            std::array::from_fn(|j| rng.random_range(0.0..(j + 1) as f64))
        };
        let got = wknn_vote(&t.normalizer().apply(&query), &t, k).unwrap();
        let want = oracle_vote(&norm(&query), &norm_all(&norm, &raw), &labels, k);
        exact_hits += usize::from(want.1);
        mismatches += usize::from((got.predicted, got.exact_match) != want);
    }

    // coarse integer lattice: duplicates with clashing labels and many ties
    let lattice: Vec<Vec<i64>> = (0..500).map(|_| (0..21).map(|_| rng.random_range(0..2)).collect()).collect();
    let lattice_labels: Vec<Grade> = (0..500).map(|_| Grade::ALL[rng.random_range(0..4)]).collect();
    let as_f64: Vec<Vec<f64>> = lattice.iter().map(|v| v.iter().map(|&x| x as f64).collect()).collect();
    let t = TrainingSet::with_normalizer(&as_f64, lattice_labels.clone(), Normalizer::identity(21)).unwrap();
    for q in 0..200 {
        let k = 1 + q % 7;
        let z: Vec<i64> = if q % 4 == 0 {
            lattice[rng.random_range(0..500)].clone()
        } else {
            (0..21).map(|_| rng.random_range(0..2)).collect()
        };
        let zf: Vec<f64> = z.iter().map(|&x| x as f64).collect();
        let got = wknn_vote(&zf, &t, k).unwrap();
        let want = rational_vote(&z, &lattice, &lattice_labels, k);
        exact_hits += usize::from(want.1);
        let mut sorted = got.votes.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        ties += usize::from(sorted[0] == sorted[1]);
        mismatches += usize::from((got.predicted, got.exact_match) != want);
    }
    outcome(
        mismatches == 0 && exact_hits > 0 && ties > 0,
        format!("{mismatches}/400 mismatches ({exact_hits} zero-distance queries, {ties} tied votes)"),
    )
}

fn oracle_normalize(raw: &[[f64; 21]]) -> impl Fn(&[f64]) -> Vec<f64> {
    let n = raw.len() as f64;
    let mean: Vec<f64> = (0..21).map(|j| raw.iter().map(|v| v[j]).sum::<f64>() / n).collect();
    let std: Vec<f64> = (0..21)
        .map(|j| (raw.iter().map(|v| (v[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt())
        .collect();
    move |v: &[f64]| v.iter().enumerate().map(|(j, x)| (x - mean[j]) / std[j]).collect()
}

fn norm_all(norm: &impl Fn(&[f64]) -> Vec<f64>, raw: &[[f64; 21]]) -> Vec<Vec<f64>> {
    raw.iter().map(|v| norm(v)).collect()
}

// ---------------------------------------------------------------------------

fn write_dataset(dir: &Path, per_grade: u64, seed0: u64) -> Manifest {
    std::fs::create_dir_all(dir).unwrap();
    let mut entries = Vec::new();
    for g in Grade::ALL {
        for i in 0..per_grade {
            let s = generate(&SynthSpec::new(g, seed0 + i)).unwrap();
            let id = s.sep.id().to_string();
            let image = dir.join(format!("{id}.png"));
            let annotation = dir.join(format!("{id}.json"));
            io::save_rgb_png(s.sep.image(), &image).unwrap();
            std::fs::write(&annotation, serialize_annotation(&s.annotation)).unwrap();
            entries.push(ManifestEntry {
                sep_id: id,
                image,
                annotation,
                label: Some(g),
                label2: None,
            });
        }
    }
    Manifest { entries }
}

fn end_to_end_grading() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = write_dataset(&tmp.path().join("data"), 40, 5000);
    let cache = FeatureCache::new(tmp.path().join("cache"));
    let out = pipeline::run(&manifest, &Config::default(), &tmp.path().join("out"), &cache).unwrap();
    let report = out.report.expect("labelled entries are evaluated");
    let cin = &report.cin;
    let obo = cin.off_by_one.unwrap_or(0.0);
    outcome(
        out.failures.is_empty() && cin.total == 160 && cin.accuracy >= E2E_MIN_ACCURACY && obo >= E2E_MIN_OFF_BY_ONE,
        format!(
            "{} SEPs, {} failed, CIN accuracy {:.4}, off-by-one {:.4}, SIL accuracy {:.4}",
            cin.total,
            out.failures.len(),
            cin.accuracy,
            obo,
            report.sil.accuracy
        ),
    )
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = write_dataset(&tmp.path().join("data"), 6, 7000);
    let cfg = Config::default();
    let files = ["features.csv", "predictions.csv", "report.txt", "report.json"];
    let read = |dir: &Path| files.map(|f| std::fs::read(dir.join(f)).unwrap());
    let mut outputs = Vec::new();
    let mut hits = Vec::new();
    for (run, cache) in [("a", "ca"), ("b", "cb"), ("c", "ca")] {
        let out_dir = tmp.path().join(run);
        let o = pipeline::run(&manifest, &cfg, &out_dir, &FeatureCache::new(tmp.path().join(cache))).unwrap();
        hits.push(o.cache_hits);
        outputs.push(read(&out_dir));
    }
    let identical = outputs.windows(2).all(|w| w[0] == w[1]);
    outcome(
        identical && hits == [0, 0, 24],
        format!("3 runs over 24 SEPs (two cold caches, one warm: hits {hits:?}), outputs identical: {identical}"),
    )
}
