use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use absmst::synthetic::{
    block_factor_returns, coupled_returns_group, prices_from_returns, weekdays, FactorModel,
    VolatilityCoupling,
};
use absmst::timeseries::{AssetClass, AssetMeta, PriceSeries};
use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

fn absmst(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_absmst"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_wide(path: &Path, series: &[PriceSeries]) {
    let dates: BTreeSet<NaiveDate> = series
        .iter()
        .flat_map(|s| s.dates().iter().copied())
        .collect();
    let lookup: Vec<BTreeMap<NaiveDate, f64>> = series
        .iter()
        .map(|s| {
            s.dates()
                .iter()
                .copied()
                .zip(s.prices().iter().copied())
                .collect()
        })
        .collect();
    let mut text = String::from("date");
    for s in series {
        text.push(',');
        text.push_str(s.symbol());
    }
    text.push('\n');
    for d in dates {
        text.push_str(&d.to_string());
        for l in &lookup {
            text.push(',');
            if let Some(p) = l.get(&d) {
                text.push_str(&p.to_string());
            }
        }
        text.push('\n');
    }
    fs::write(path, text).unwrap();
}

fn write_meta(path: &Path, meta: &[AssetMeta]) {
    let mut text = String::from("symbol,class\n");
    for m in meta {
        text.push_str(&format!("{},{}\n", m.symbol, m.class));
    }
    fs::write(path, text).unwrap();
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new(prices: &[PriceSeries], meta: &[AssetMeta]) -> Self {
        let dir = TempDir::new().unwrap();
        write_wide(&dir.path().join("prices.csv"), prices);
        write_meta(&dir.path().join("meta.csv"), meta);
        Fixture { dir }
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).to_string_lossy().into_owned()
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, command: &str, out: &str, extra: &[&str]) -> Output {
        let (prices, meta, out) = (
            self.path("prices.csv"),
            self.path("meta.csv"),
            self.path(out),
        );
        let mut args = vec![command, "--prices", &prices, "--meta", &meta, "--out", &out];
        args.extend_from_slice(extra);
        absmst(&args)
    }
}

fn factor_panel(
    seed: u64,
    classes: &[(AssetClass, usize)],
    len: usize,
) -> (Vec<PriceSeries>, Vec<AssetMeta>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (returns, meta) = block_factor_returns(&mut rng, classes, len, &FactorModel::default());
    (returns.iter().map(prices_from_returns).collect(), meta)
}

fn price_series(symbol: &str, dates: &[NaiveDate], returns: &[f64]) -> PriceSeries {
    let mut p = 100.0;
    let mut obs = vec![(dates[0], p)];
    for (d, r) in dates[1..].iter().zip(returns) {
        p *= r.exp();
        obs.push((*d, p));
    }
    PriceSeries::new(symbol, obs).unwrap()
}

#[test]
fn two_assets_give_one_edge_tree() {
    let (prices, meta) = factor_panel(
        1,
        &[
            (AssetClass::StockIndex, 1),
            (AssetClass::CommodityFuture, 1),
        ],
        150,
    );
    let fx = Fixture::new(&prices, &meta);
    let o = fx.run("mst", "out", &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let dot = fs::read_to_string(fx.out("out/mst_full.dot")).unwrap();
    assert_eq!(dot.matches(" -- ").count(), 1);
    assert!(dot.contains("\"CMD00\" -- \"STK00\""));
    assert!(fx.out("out/mst_full.json").exists());
    assert!(fx.out("out/config.toml").exists());
    let axioms = fs::read_to_string(fx.out("out/axioms.csv")).unwrap();
    assert!(axioms.lines().nth(1).unwrap().ends_with(",true"));
}

#[test]
fn yearly_windows_give_trees_and_overlap_rows() {
    let (prices, meta) = factor_panel(
        2,
        &[(AssetClass::StockIndex, 3), (AssetClass::CurrencyFuture, 3)],
        1040,
    );
    let fx = Fixture::new(&prices, &meta);
    let o = fx.run("mst", "out", &["--yearly"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for year in 2007..=2010 {
        assert!(fx.out(&format!("out/mst_{year}.dot")).exists());
    }
    let stability = fs::read_to_string(fx.out("out/stability.csv")).unwrap();
    assert_eq!(stability.lines().count(), 4);
    assert!(stability.lines().nth(1).unwrap().starts_with("2007,2008,"));
}

#[test]
fn insufficient_overlap_names_the_pair() {
    let dates = weekdays(NaiveDate::from_ymd_opt(2007, 1, 1).unwrap(), 300);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut noise = |n: usize| {
        (0..n)
            .map(|_| 0.01 * (rng.random::<f64>() - 0.5))
            .collect::<Vec<_>>()
    };
    let a = price_series("AAA", &dates, &noise(299));
    let b = price_series("BBB", &dates[250..], &noise(49));
    let meta = vec![
        AssetMeta::new("AAA", AssetClass::StockIndex),
        AssetMeta::new("BBB", AssetClass::StockIndex),
    ];
    let fx = Fixture::new(&[a, b], &meta);
    let o = fx.run("mst", "out", &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("AAA") && err.contains("BBB"), "{err}");
}

#[test]
fn lag_self_pair_only_when_requested() {
    let (prices, meta) = factor_panel(
        4,
        &[
            (AssetClass::StockIndex, 3),
            (AssetClass::CommodityFuture, 1),
        ],
        400,
    );
    let fx = Fixture::new(&prices, &meta);
    let o = fx.run("lag", "plain", &["--target", "STK01"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(fx.out("plain/lag_table.csv")).unwrap();
    assert_eq!(
        table.lines().next().unwrap(),
        "target,reference,lag_days,peak,raw_peak,flag"
    );
    assert_eq!(table.lines().count(), 3);
    assert!(!table.contains("STK01,STK01"));

    let o = fx.run(
        "lag",
        "with_self",
        &["--target", "STK01", "--include-self", "--dump-curves"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(fx.out("with_self/lag_table.csv")).unwrap();
    assert!(table.contains("STK01,STK01,0,"));
    assert!(fx.out("with_self/curves/STK01__STK00.csv").exists());
    let summary = fs::read_to_string(fx.out("with_self/lag_summary.csv")).unwrap();
    assert!(summary
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("STK01,stock,3,0,"));
}

#[test]
fn lag_with_explicit_references() {
    let (prices, meta) = factor_panel(
        5,
        &[
            (AssetClass::StockIndex, 2),
            (AssetClass::CommodityFuture, 2),
        ],
        400,
    );
    let fx = Fixture::new(&prices, &meta);
    let o = fx.run(
        "lag",
        "out",
        &[
            "--target",
            "CMD00",
            "--target",
            "STK00",
            "--references",
            "CMD01,STK01",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(fx.out("out/lag_table.csv")).unwrap();
    let pairs: Vec<&str> = table.lines().skip(1).map(|l| &l[..11]).collect();
    assert_eq!(
        pairs,
        ["CMD00,CMD01", "CMD00,STK01", "STK00,CMD01", "STK00,STK01"]
    );
}

#[test]
fn coupled_target_summary_mean_near_injected_lag() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let lags: Vec<usize> = (0..28).map(|_| rng.random_range(25..=35)).collect();
    let (target, refs) =
        coupled_returns_group(&mut rng, 1200, &lags, &VolatilityCoupling::default());
    let dates = weekdays(NaiveDate::from_ymd_opt(2007, 1, 1).unwrap(), 1201);
    let mut prices = vec![price_series("EUA", &dates, &target)];
    let mut meta = vec![AssetMeta::new("EUA", AssetClass::CommodityFuture)];
    for (i, r) in refs.iter().enumerate() {
        let symbol = format!("IDX{i:02}");
        prices.push(price_series(&symbol, &dates, r));
        meta.push(AssetMeta::new(symbol, AssetClass::StockIndex));
    }
    let fx = Fixture::new(&prices, &meta);
    let o = fx.run("lag", "out", &["--target", "EUA"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = fs::read_to_string(fx.out("out/lag_summary.csv")).unwrap();
    let row: Vec<&str> = summary.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..4], ["EUA", "stock", "28", "0"]);
    let mean: f64 = row[4].parse().unwrap();
    let expected = lags.iter().sum::<usize>() as f64 / 28.0;
    assert!((mean - expected).abs() < 1.0, "{mean} vs {expected}");
}

#[test]
fn unknown_target_exits_with_status_two() {
    let (prices, meta) = factor_panel(6, &[(AssetClass::StockIndex, 2)], 200);
    let fx = Fixture::new(&prices, &meta);
    let o = fx.run("lag", "out", &["--target", "EUA"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown symbol EUA"));
}

#[test]
fn missing_inputs_exit_with_status_two() {
    let o = absmst(&[
        "mst",
        "--prices",
        "/nonexistent/prices.csv",
        "--meta",
        "m.csv",
        "--out",
        "x",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let (prices, meta) = factor_panel(7, &[(AssetClass::StockIndex, 2)], 200);
    let fx = Fixture::new(&prices, &meta);
    let p = fx.path("prices.csv");
    let o = absmst(&["mst", "--prices", &p, "--out", &fx.path("out")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--meta"));
}

fn granger_fixture(strong: bool) -> Fixture {
    let dates = weekdays(NaiveDate::from_ymd_opt(2007, 1, 1).unwrap(), 501);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut x = Vec::with_capacity(500);
    let mut y = Vec::with_capacity(500);
    for t in 0..500 {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        x.push(0.01 * sign * (0.5 + rng.random::<f64>()));
        let size = if strong && t > 0 {
            0.8 * f64::abs(x[t - 1]) + 0.0005 * rng.random::<f64>()
        } else {
            0.01 * (0.5 + rng.random::<f64>())
        };
        y.push(if rng.random::<bool>() { size } else { -size });
    }
    let prices = [price_series("X", &dates, &x), price_series("Y", &dates, &y)];
    let meta = vec![
        AssetMeta::new("X", AssetClass::StockIndex),
        AssetMeta::new("Y", AssetClass::CommodityFuture),
    ];
    Fixture::new(&prices, &meta)
}

#[test]
fn granger_end_to_end() {
    let fx = granger_fixture(true);
    let o = fx.run(
        "granger",
        "out",
        &["--cause", "X", "--effect", "Y", "--order", "5"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(fx.out("out/granger.csv")).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..4], ["X", "Y", "5", "495"]);
    assert!(row[5].parse::<f64>().unwrap() < 0.001);

    let fx = granger_fixture(false);
    let o = fx.run("granger", "out", &["--cause", "X", "--effect", "Y"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(fx.out("out/granger.csv")).unwrap();
    let p: f64 = text
        .lines()
        .nth(1)
        .unwrap()
        .rsplit(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!((0.0..=1.0).contains(&p));

    let o = fx.run(
        "granger",
        "short",
        &["--cause", "X", "--effect", "Y", "--order", "60"],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let (prices, meta) = factor_panel(
        9,
        &[
            (AssetClass::StockIndex, 6),
            (AssetClass::CommodityFuture, 4),
        ],
        700,
    );
    let fx = Fixture::new(&prices, &meta);
    for (command, extra) in [
        ("mst", vec!["--yearly"]),
        (
            "lag",
            vec!["--target", "CMD00", "--target", "CMD01", "--dump-curves"],
        ),
        ("corr", vec![]),
    ] {
        let mut one = extra.clone();
        one.extend(["--threads", "1"]);
        let mut four = extra.clone();
        four.extend(["--threads", "4"]);
        assert!(fx
            .run(command, &format!("{command}1"), &one)
            .status
            .success());
        assert!(fx
            .run(command, &format!("{command}4"), &four)
            .status
            .success());
        assert_eq!(
            read_tree(&fx.out(&format!("{command}1"))),
            read_tree(&fx.out(&format!("{command}4"))),
            "{command}"
        );
    }
}

fn read_tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.insert(
                    path.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&path).unwrap(),
                );
            }
        }
    }
    files
}

#[test]
fn settings_file_and_snapshot_reproduce_run() {
    let (prices, meta) = factor_panel(
        10,
        &[(AssetClass::StockIndex, 3), (AssetClass::CurrencyFuture, 2)],
        400,
    );
    let fx = Fixture::new(&prices, &meta);
    let settings = fx.path("settings.toml");
    fs::write(
        &settings,
        format!(
            "prices = {:?}\nmeta = {:?}\nmax_lag = 40\nmin_obs = 80\ntarget = [\"CUR00\"]\n",
            fx.path("prices.csv"),
            fx.path("meta.csv")
        ),
    )
    .unwrap();
    let first = fx.path("first");
    let o = absmst(&[
        "lag",
        "--config",
        &settings,
        "--max-lag",
        "60",
        "--out",
        &first,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let snapshot = fs::read_to_string(fx.out("first/config.toml")).unwrap();
    assert!(snapshot.contains("max_lag = 60"));
    assert!(snapshot.contains("min_obs = 80"));

    let second = fx.path("second");
    let snap = fx.path("first/config.toml");
    let o = absmst(&["lag", "--config", &snap, "--out", &second]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read_tree(&fx.out("first")), read_tree(&fx.out("second")));
}

#[test]
fn long_price_format_and_dumps() {
    let (prices, meta) = factor_panel(
        11,
        &[
            (AssetClass::StockIndex, 2),
            (AssetClass::CommodityFuture, 1),
        ],
        200,
    );
    let fx = Fixture::new(&prices, &meta);
    let mut long = String::from("symbol,date,price\n");
    for s in &prices {
        for (d, p) in s.dates().iter().zip(s.prices()) {
            long.push_str(&format!("{},{d},{p}\n", s.symbol()));
        }
    }
    fs::write(fx.out("long.csv"), long).unwrap();
    let (long_path, out) = (fx.path("long.csv"), fx.path("ret"));
    let o = absmst(&[
        "returns",
        "--prices",
        &long_path,
        "--price-format",
        "long",
        "--out",
        &out,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = fx.run("returns", "ret_wide", &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read(fx.out("ret/returns.csv")).unwrap(),
        fs::read(fx.out("ret_wide/returns.csv")).unwrap()
    );

    let o = fx.run("corr", "corr", &["--format", "long"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let corr = fs::read_to_string(fx.out("corr/corr_full.csv")).unwrap();
    assert_eq!(corr.lines().count(), 4);
    assert!(corr.starts_with("a,b,rho,distance\nCMD00,STK00,"));
}
