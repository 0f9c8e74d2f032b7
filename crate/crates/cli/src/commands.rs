use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::error::ErrorKind;
use clap::CommandFactory;
use elastica::simulate::ALL_METHODS;
use elastica::{
    adjusted_r2, bootstrap_with, coef_confidence_regions, distance_confidence_region, elastic_distance,
    elastic_mean_model, fit_method, frechet_predict, model_r2, oob_model_comparison, permutation_test_global,
    run_benchmark, AlignConfig, BootstrapOptions, Curve64, Dataset64, FitConfig, Method, Model64, OutputGrid, Scenario,
    ScenarioSpec, SplineBasis,
};

use crate::error::CliError;
use crate::io::{self, CovariateTable, CurveTable, Encoding};
use crate::model_file::ModelFile;
use crate::svg::{self, Mark, PALETTE};
use crate::{Cli, DataArgs, FitArgs, SimArgs};

fn usage_error(message: &str) -> ! {
    Cli::command().error(ErrorKind::MissingRequiredArgument, message).exit()
}

fn fit_config(args: &FitArgs) -> Result<FitConfig, CliError> {
    let basis = SplineBasis::new(args.degree, args.knots, args.closed).map_err(|e| CliError::Parse(e.to_string()))?;
    let config = FitConfig {
        eps_converge: args.eps,
        max_iter: args.max_iter,
        align: AlignConfig { grid_size: args.grid_size, ..AlignConfig::default() },
        basis,
        closed: args.closed,
        seed: args.seed,
        restarts: args.restarts,
        prealign_start: !args.no_prealign_start,
        ridge: args.ridge,
        target_points: args.target_points,
    };
    config.validate().map_err(|e| CliError::Parse(e.to_string()))?;
    Ok(config)
}

struct Inputs {
    curves: CurveTable,
    covariates: Option<CovariateTable>,
    data: Dataset64,
}

impl Inputs {
    fn read(args: &DataArgs, closed: bool) -> Result<Self, CliError> {
        let curves = io::read_curves(&args.curves, closed)?;
        let covariates = args.covariates.as_deref().map(|p| io::read_covariates(p, None)).transpose()?;
        let data = match &covariates {
            Some(cov) => io::dataset(&curves, cov)?,
            None => Dataset64::unconditional(curves.curves.clone())?,
        };
        Ok(Self { curves, covariates, data })
    }

    fn encodings(&self) -> Vec<Encoding> {
        self.covariates.as_ref().map(|c| c.encodings.clone()).unwrap_or_default()
    }
}

/// Prediction rows as `(label, design row)`.
fn prediction_rows(at: Option<&Path>, encodings: &[Encoding]) -> Result<Vec<(String, Vec<f64>)>, CliError> {
    match at {
        Some(path) => {
            let table = io::read_covariates(path, Some(encodings))?;
            Ok(table.ids.iter().map(|id| (id.clone(), table.rows[id].clone())).collect())
        }
        None if encodings.is_empty() => Ok(vec![("intercept".to_string(), Vec::new())]),
        None => usage_error("--at is required for models with covariates"),
    }
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => io::write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn curve_marks<'a>(curves: impl IntoIterator<Item = &'a Curve64>, width: f64, opacity: f64) -> Vec<Mark> {
    curves
        .into_iter()
        .enumerate()
        .map(|(i, c)| Mark::line(svg::planar(c.points(), c.dim()), PALETTE[i % PALETTE.len()], width, opacity))
        .collect()
}

pub struct FitOutputs {
    pub at: Option<PathBuf>,
    pub out: PathBuf,
    pub report: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub strict: bool,
}

pub fn fit(data_args: &DataArgs, args: &FitArgs, method: &str, outputs: FitOutputs) -> Result<(), CliError> {
    let method = Method::from_name(method).ok_or_else(|| CliError::Parse(format!("unknown method '{method}'")))?;
    if method == Method::Frechet && outputs.at.is_none() {
        usage_error("--method frechet requires --at: Fréchet regression only predicts at given covariate values");
    }
    let config = fit_config(args)?;
    let inputs = Inputs::read(data_args, args.closed)?;
    let encodings = inputs.encodings();
    let data = &inputs.data;
    let mut report = String::new();
    writeln!(report, "method: {}", method.name()).unwrap();
    writeln!(report, "curves: {}", data.len()).unwrap();
    writeln!(report, "covariates: {}", data.covariate_names().join(", ")).unwrap();
    writeln!(report, "basis: degree {}, {} knots{}", args.degree, args.knots, if args.closed { ", periodic" } else { "" })
        .unwrap();

    let (predictions, converged, iterations) = if method == Method::Frechet {
        let rows = prediction_rows(outputs.at.as_deref(), &encodings)?;
        let x: Vec<Vec<f64>> = rows.iter().map(|r| r.1.clone()).collect();
        let curves = frechet_predict(data, &x, &config)?;
        writeln!(report, "no global model: predictions at {} covariate rows", rows.len()).unwrap();
        let labelled: Vec<(String, Curve64)> = rows.into_iter().map(|r| r.0).zip(curves).collect();
        (Some(labelled), true, 0)
    } else {
        let model = fit_method(method, data, &config)?;
        let diag = &model.diagnostics;
        writeln!(report, "iterations: {}", diag.iterations).unwrap();
        writeln!(report, "converged: {}", diag.converged).unwrap();
        writeln!(report, "final loss: {}", diag.final_loss).unwrap();
        report.push_str("loss trace:\n");
        diag.loss_trace.iter().enumerate().for_each(|(s, l)| writeln!(report, "  {s} {l}").unwrap());
        let r2 = model_r2(&model, data, &config)?;
        writeln!(report, "R2: {r2}").unwrap();
        match adjusted_r2(r2, data.len(), data.num_covariates()) {
            Ok(adj) => writeln!(report, "adjusted R2: {adj}").unwrap(),
            Err(e) => writeln!(report, "adjusted R2: undefined ({e})").unwrap(),
        }
        ModelFile::from_model(&model, encodings.clone(), config.target_points, config.seed).save(&outputs.out)?;
        let preds = match outputs.at.as_deref() {
            Some(at) => Some(predict_rows(&model, &prediction_rows(Some(at), &encodings)?, config.target_points, false)?),
            None => None,
        };
        (preds, diag.converged, diag.iterations)
    };

    if let Some(preds) = &predictions {
        if let Some(path) = &outputs.predictions {
            io::write_file(path, &io::curves_csv(preds.iter().map(|(id, c)| (id.clone(), c))))?;
        }
    }
    if let Some(path) = &outputs.svg {
        let mut marks: Vec<Mark> = inputs
            .curves
            .curves
            .iter()
            .map(|c| Mark::line(svg::planar(c.centered().points(), c.dim()), "#999999", 1.0, 0.6))
            .collect();
        if let Some(preds) = &predictions {
            marks.extend(curve_marks(preds.iter().map(|p| p.1.centered()).collect::<Vec<_>>().iter(), 2.0, 1.0));
        }
        io::write_file(path, &svg::render(&format!("{} fit", method.name()), &marks))?;
    }
    emit(outputs.report.as_deref(), &report)?;
    if outputs.strict && !converged {
        return Err(CliError::NotConverged(iterations));
    }
    Ok(())
}

fn predict_rows(model: &Model64, rows: &[(String, Vec<f64>)], points: usize, centered: bool) -> Result<Vec<(String, Curve64)>, CliError> {
    rows.iter()
        .map(|(id, x)| Ok((id.clone(), model.predict(x, OutputGrid::Uniform(points), centered)?)))
        .collect()
}

pub fn predict(
    model_path: &Path,
    at: Option<&Path>,
    points: Option<usize>,
    centered: bool,
    out: Option<&Path>,
    svg_path: Option<&Path>,
) -> Result<(), CliError> {
    let file = ModelFile::load(model_path)?;
    let model = file.to_model()?;
    let rows = prediction_rows(at, &file.encoding)?;
    let points = points.unwrap_or(file.target_points);
    if points < 2 {
        return Err(CliError::Parse("--points must be at least 2".into()));
    }
    let preds = predict_rows(&model, &rows, points, centered)?;
    emit(out, &io::curves_csv(preds.iter().map(|(id, c)| (id.clone(), c))))?;
    if let Some(path) = svg_path {
        let marks = curve_marks(preds.iter().map(|p| &p.1), 2.0, 1.0);
        io::write_file(path, &svg::render("predictions", &marks))?;
    }
    Ok(())
}

pub fn distance(curves: &Path, closed: bool, ids: Option<&[String]>, grid_size: usize, out: Option<&Path>) -> Result<(), CliError> {
    let table = io::read_curves(curves, closed)?;
    let config = AlignConfig { grid_size, ..AlignConfig::default() };
    let index = |id: &str| {
        table.ids.iter().position(|i| i == id).ok_or_else(|| CliError::Parse(format!("unknown curve id '{id}'")))
    };
    let pairs: Vec<(usize, usize)> = match ids {
        Some([a, b]) => vec![(index(a)?, index(b)?)],
        Some(_) => return Err(CliError::Parse("--ids takes exactly two curve ids".into())),
        None => (0..table.ids.len()).flat_map(|a| (a + 1..table.ids.len()).map(move |b| (a, b))).collect(),
    };
    let mut text = String::from("a,b,distance\n");
    for (a, b) in pairs {
        let d = elastic_distance(&table.curves[a], &table.curves[b], &config)?;
        writeln!(text, "{},{},{d}", table.ids[a], table.ids[b]).unwrap();
    }
    emit(out, &text)
}

pub fn mean(curves: &Path, args: &FitArgs, out: Option<&Path>, svg_path: Option<&Path>) -> Result<(), CliError> {
    let config = fit_config(args)?;
    let table = io::read_curves(curves, args.closed)?;
    let model = elastic_mean_model(&table.curves, &config)?;
    let mean = model.predict(&[], OutputGrid::Uniform(config.target_points), true)?;
    emit(out, &io::curves_csv([("mean".to_string(), &mean)]))?;
    if let Some(path) = svg_path {
        let mut marks: Vec<Mark> = table
            .curves
            .iter()
            .map(|c| Mark::line(svg::planar(c.centered().points(), c.dim()), "#999999", 1.0, 0.6))
            .collect();
        marks.push(Mark::line(svg::planar(mean.points(), mean.dim()), PALETTE[1], 2.5, 1.0));
        io::write_file(path, &svg::render("elastic mean", &marks))?;
    }
    Ok(())
}

fn effect_name(names: &[String], j: usize) -> String {
    if j == 0 {
        "intercept".to_string()
    } else {
        names[j - 1].clone()
    }
}

fn coord_header(prefix: &str, d: usize) -> String {
    (1..=d).map(|i| format!("{prefix}c{i}")).collect::<Vec<_>>().join(",")
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// File-name-safe version of an id.
fn slug(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

pub fn bootstrap(
    data_args: &DataArgs,
    args: &FitArgs,
    at: Option<&Path>,
    n_boot: usize,
    alpha: f64,
    warm_start: bool,
    out_dir: &Path,
) -> Result<(), CliError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CliError::Parse(format!("--alpha must lie in (0, 1), got {alpha}")));
    }
    let config = fit_config(args)?;
    let inputs = Inputs::read(data_args, args.closed)?;
    let data = &inputs.data;
    let rows = match at {
        Some(_) => prediction_rows(at, &inputs.encodings())?,
        None => Vec::new(),
    };
    let x_eval: Vec<Vec<f64>> = rows.iter().map(|r| r.1.clone()).collect();
    let options = BootstrapOptions { replicates: n_boot, seed: args.seed, warm_start };
    let samples = bootstrap_with(data, &config, &x_eval, &options)?;
    let names = data.covariate_names();
    let (m_count, d) = (config.basis.size(), data.dim());
    let effects = names.len() + 1;

    let mut coefs = format!("replicate,effect,basis,{}\n", coord_header("", d));
    for s in &samples {
        for j in 0..effects {
            for m in 0..m_count {
                writeln!(coefs, "{},{},{m},{}", s.replicate, effect_name(names, j), join(s.model.coef(j, m))).unwrap();
            }
        }
    }
    io::write_file(&out_dir.join("coefficients.csv"), &coefs)?;

    let inference = coef_confidence_regions(&samples, alpha)?;
    let mut ellipses = format!(
        "effect,basis,{},radius,joint_radius,null_statistic,rejected,regularized\n",
        coord_header("center_", d)
    );
    for j in 0..effects {
        for m in 0..m_count {
            let e = inference.ellipse(j, m);
            writeln!(
                ellipses,
                "{},{m},{},{},{},{},{},{}",
                effect_name(names, j),
                join(&e.center),
                e.radius,
                e.joint_radius,
                e.null_statistic(),
                inference.coef_rejected[j * m_count + m],
                e.regularized
            )
            .unwrap();
        }
    }
    io::write_file(&out_dir.join("ellipses.csv"), &ellipses)?;
    let mut tests = String::from("effect,rejected\n");
    for j in 0..effects {
        writeln!(tests, "{},{}", effect_name(names, j), inference.effect_rejected[j]).unwrap();
    }
    io::write_file(&out_dir.join("effects.csv"), &tests)?;

    for j in 0..effects {
        let mut marks = Vec::new();
        for m in 0..m_count {
            let color = PALETTE[m % PALETTE.len()];
            let draws: Vec<[f64; 2]> = samples.iter().flat_map(|s| svg::planar(s.model.coef(j, m), d)).collect();
            marks.push(Mark::Dots { points: draws, color, radius: 1.5 });
            let e = inference.ellipse(j, m);
            let shape = [e.shape[0], e.shape[1], e.shape[d], e.shape[d + 1]];
            marks.push(Mark::line(svg::ellipse([e.center[0], e.center[1]], shape, e.radius, 96), color, 1.5, 1.0));
        }
        marks.push(Mark::Dots { points: vec![[0.0, 0.0]], color: "black", radius: 3.0 });
        let name = effect_name(names, j);
        io::write_file(&out_dir.join(format!("coefficients_{}.svg", slug(&name))), &svg::render(&name, &marks))?;
    }

    let mut members = String::from("at,rank,replicate,distance\n");
    for (id, x) in &rows {
        let region = distance_confidence_region(&samples, x, alpha, &config)?;
        for (rank, (&i, dist)) in region.members.iter().zip(&region.distances).enumerate() {
            writeln!(members, "{id},{rank},{},{dist}", samples[i].replicate).unwrap();
        }
        let labelled = std::iter::once(("mean".to_string(), &region.mean))
            .chain(region.members.iter().zip(&region.curves).map(|(&i, c)| (format!("boot{}", samples[i].replicate), c)));
        io::write_file(&out_dir.join(format!("region_{}.csv", slug(id))), &io::curves_csv(labelled))?;
        let mut marks: Vec<Mark> =
            region.curves.iter().map(|c| Mark::line(svg::planar(c.points(), c.dim()), PALETTE[0], 1.0, 0.3)).collect();
        marks.push(Mark::line(svg::planar(region.mean.points(), region.mean.dim()), PALETTE[1], 2.5, 1.0));
        io::write_file(&out_dir.join(format!("region_{}.svg", slug(id))), &svg::render(&format!("region at {id}"), &marks))?;
    }
    if !rows.is_empty() {
        io::write_file(&out_dir.join("regions.csv"), &members)?;
    }
    Ok(())
}

pub struct TestChoice {
    pub global: bool,
    pub coef: bool,
    pub oob: bool,
    pub drop: Vec<String>,
    pub n_perm: usize,
    pub n_boot: usize,
    pub alpha: f64,
}

/// Design columns left after removing the named raw or design covariates.
fn kept_columns(inputs: &Inputs, drop: &str) -> Result<Vec<usize>, CliError> {
    let names = inputs.data.covariate_names();
    let mut removed = vec![false; names.len()];
    for token in drop.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let mut hit = false;
        let mut col = 0;
        for enc in inputs.encodings() {
            let cols = enc.columns();
            let raw = match &enc {
                Encoding::Numeric { name } | Encoding::Categorical { name, .. } => name.clone(),
            };
            for (k, c) in cols.iter().enumerate() {
                if raw == token || c == token {
                    removed[col + k] = true;
                    hit = true;
                }
            }
            col += cols.len();
        }
        if !hit {
            return Err(CliError::Parse(format!("--drop: unknown covariate '{token}'")));
        }
    }
    Ok((0..names.len()).filter(|&c| !removed[c]).collect())
}

pub fn test(data_args: &DataArgs, args: &FitArgs, choice: TestChoice, out: Option<&Path>) -> Result<(), CliError> {
    if !(choice.global || choice.coef || choice.oob) {
        usage_error("choose at least one of --global, --coef, --oob");
    }
    if choice.oob && choice.drop.is_empty() {
        usage_error("--oob requires at least one --drop");
    }
    if !(choice.alpha > 0.0 && choice.alpha < 1.0) {
        return Err(CliError::Parse(format!("--alpha must lie in (0, 1), got {}", choice.alpha)));
    }
    let config = fit_config(args)?;
    let inputs = Inputs::read(data_args, args.closed)?;
    let data = &inputs.data;
    let mut text = String::from("test,term,statistic,p_value,fraction,rejected\n");
    if choice.global {
        let res = permutation_test_global(data, &config, choice.n_perm, args.seed)?;
        writeln!(text, "global,all,{},{},,{}", res.r2, res.p_value, res.p_value <= choice.alpha).unwrap();
    }
    if choice.coef {
        let samples = bootstrap_with(data, &config, &[], &BootstrapOptions {
            replicates: choice.n_boot,
            seed: args.seed,
            warm_start: false,
        })?;
        let inf = coef_confidence_regions(&samples, choice.alpha)?;
        let m_count = inf.num_functions;
        for j in 0..inf.effect_rejected.len() {
            // largest null statistic relative to the joint critical value
            let ratio = (0..m_count)
                .map(|m| {
                    let e = inf.ellipse(j, m);
                    e.null_statistic() / e.joint_radius
                })
                .fold(f64::NEG_INFINITY, f64::max);
            writeln!(text, "coef,{},{ratio},,,{}", effect_name(data.covariate_names(), j), inf.effect_rejected[j]).unwrap();
        }
    }
    if choice.oob {
        let subsets = choice.drop.iter().map(|d| kept_columns(&inputs, d)).collect::<Result<Vec<_>, _>>()?;
        let results = oob_model_comparison(data, &config, &subsets, choice.n_boot, args.seed)?;
        for (drop, r) in choice.drop.iter().zip(&results) {
            writeln!(text, "oob,{},{},,{},", drop.replace(',', "+"), r.mean_delta_mse, r.increase_fraction).unwrap();
        }
    }
    emit(out, &text)
}

fn scenario_spec(args: &SimArgs) -> Result<ScenarioSpec<f64>, CliError> {
    let scenario = Scenario::from_name(&args.scenario).ok_or_else(|| CliError::Parse(format!("unknown scenario '{}'", args.scenario)))?;
    let mut spec = ScenarioSpec::new(scenario);
    spec.seed = args.seed;
    if let Some(sd) = args.sd {
        spec.sd = sd;
    }
    if let Some(n) = args.n {
        spec.n = n;
    }
    if let Some(k) = &args.kappa {
        let parts: Vec<usize> = k
            .split(',')
            .map(|v| v.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| CliError::Parse(format!("--kappa expects MIN,MAX, got '{k}'")))?;
        match parts[..] {
            [lo, hi] => spec.kappa_range = (lo, hi),
            _ => return Err(CliError::Parse(format!("--kappa expects MIN,MAX, got '{k}'"))),
        }
    }
    spec.validate().map_err(|e| CliError::Parse(e.to_string()))?;
    Ok(spec)
}

fn write_dataset(dir: &Path, prefix: &str, data: &Dataset64) -> Result<(), CliError> {
    let ids: Vec<String> = (0..data.len()).map(|i| format!("{prefix}{i:03}")).collect();
    io::write_file(&dir.join(format!("{prefix}_curves.csv")), &io::curves_csv(ids.iter().cloned().zip(data.curves())))?;
    let mut cov = String::from("curve_id");
    data.covariate_names().iter().for_each(|n| write!(cov, ",{n}").unwrap());
    cov.push('\n');
    for (id, x) in ids.iter().zip(data.covariates()) {
        writeln!(cov, "{id},{}", join(x)).unwrap();
    }
    io::write_file(&dir.join(format!("{prefix}_covariates.csv")), &cov)
}

pub fn simulate(args: &SimArgs, out_dir: &Path) -> Result<(), CliError> {
    let spec = scenario_spec(args)?;
    let sim = elastica::generate_scenario(&spec)?;
    write_dataset(out_dir, "train", &sim.train)?;
    write_dataset(out_dir, "test", &sim.test)
}

pub fn bench(args: &SimArgs, replicates: usize, methods: Option<&str>, out: Option<&Path>) -> Result<(), CliError> {
    let spec = scenario_spec(args)?;
    if replicates == 0 {
        return Err(CliError::Parse("--replicates must be positive".into()));
    }
    let methods: Vec<Method> = match methods {
        Some(list) => list
            .split(',')
            .map(|m| {
                Method::from_name(m.trim())
                    .filter(|m| ALL_METHODS.contains(m))
                    .ok_or_else(|| CliError::Parse(format!("unknown method '{m}'")))
            })
            .collect::<Result<_, _>>()?,
        None => ALL_METHODS.to_vec(),
    };
    let start = Instant::now();
    let table = run_benchmark(&spec, &methods, replicates, args.seed, None)?;
    let cell = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |v| v.to_string());
    let mut text = String::from("replicate");
    methods.iter().for_each(|m| write!(text, ",{}", m.name()).unwrap());
    text.push_str(",best\n");
    for r in 0..replicates {
        write!(text, "{r}").unwrap();
        table.mse[r].iter().for_each(|&v| write!(text, ",{}", cell(v)).unwrap());
        writeln!(text, ",{}", table.best_in_replicate(r).map_or("NA", |m| methods[m].name())).unwrap();
    }
    write!(text, "mean").unwrap();
    (0..methods.len()).for_each(|m| write!(text, ",{}", cell(table.mean_mse(m))).unwrap());
    writeln!(text, ",{}", table.best().map_or("NA", |m| methods[m].name())).unwrap();
    emit(out, &text)?;
    // wall-clock times vary between runs and stay out of the table
    for (m, method) in methods.iter().enumerate() {
        eprintln!("{}: mean {:.3} s per fit, {} failures", method.name(), table.mean_seconds(m), table.failures(m));
    }
    eprintln!("total {:.1} s", start.elapsed().as_secs_f64());
    Ok(())
}
