//! Merges the config file, command-line flags and defaults into one run
//! description. Flags override the file, the file overrides defaults.

use std::fs;
use std::path::{Path, PathBuf};

use driftclust::dataio::{gen_blobs, load_csv, load_idx};
use driftclust::trainer::TRAINER_KEYS;
use driftclust::{BackboneKind, BackboneSpec, Dataset, Error, KvDoc, SeededRng, TrainerConfig};

use crate::args::{ClusterArgs, RunArgs};
use crate::failure::Failure;

const SOURCE_KEYS: &[&str] = &[
    "data",
    "images",
    "labels",
    "csv",
    "limit",
    "blob_clusters",
    "blob_points",
    "blob_dim",
    "blob_separation",
    "blob_sigma",
    "data_seed",
];

const MODEL_KEYS: &[&str] = &["backbone", "backbone_dim", "backbone_seed"];

const OUTPUT_KEYS: &[&str] = &["out_labels", "out_metrics", "checkpoint", "resume"];

pub const DEFAULT_IMAGES: &str = "data/mnist/train-images-idx3-ubyte";
pub const DEFAULT_LABELS: &str = "data/mnist/train-labels-idx1-ubyte";

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Mnist {
        images: PathBuf,
        labels: Option<PathBuf>,
    },
    Csv(PathBuf),
    Blobs {
        clusters: usize,
        points: usize,
        dim: usize,
        separation: f64,
        sigma: f64,
        /// `None` follows the run seed.
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub trainer: TrainerConfig,
    pub backbone: BackboneKind,
    pub backbone_dim: usize,
    pub backbone_seed: u64,
    pub source: DataSource,
    pub limit: Option<usize>,
    pub out_labels: Option<PathBuf>,
    pub out_metrics: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub resume: Option<PathBuf>,
    /// Keys set by the file or by flags, in that order.
    pub explicit: KvDoc,
}

fn all_keys() -> Vec<&'static str> {
    TRAINER_KEYS
        .iter()
        .chain(MODEL_KEYS)
        .chain(SOURCE_KEYS)
        .chain(OUTPUT_KEYS)
        .copied()
        .collect()
}

fn set_opt<T: ToString>(doc: &mut KvDoc, key: &str, value: &Option<T>) {
    if let Some(v) = value {
        doc.set(key, v.to_string());
    }
}

fn set_path(doc: &mut KvDoc, key: &str, value: &Option<PathBuf>) {
    if let Some(p) = value {
        doc.set(key, p.display());
    }
}

fn overlay_run_flags(doc: &mut KvDoc, a: &RunArgs) {
    set_opt(doc, "data", &a.data);
    set_path(doc, "images", &a.images);
    set_path(doc, "labels", &a.labels);
    set_path(doc, "csv", &a.csv);
    set_opt(doc, "limit", &a.limit);
    set_opt(doc, "k", &a.k);
    set_opt(doc, "nm", &a.nm);
    set_opt(doc, "km", &a.km);
    set_opt(doc, "eta", &a.eta);
    set_opt(doc, "epochs", &a.epochs);
    set_opt(doc, "max_iters", &a.max_iters);
    set_opt(doc, "mode", &a.mode);
    set_opt(doc, "seed", &a.seed);
    set_opt(doc, "hidden_dim", &a.hidden_dim);
    set_opt(doc, "rollback", &a.rollback);
    set_opt(doc, "baseline3_features", &a.baseline3_features);
    set_opt(doc, "backbone", &a.backbone);
    set_opt(doc, "backbone_dim", &a.backbone_dim);
    set_opt(doc, "backbone_seed", &a.backbone_seed);
    set_opt(doc, "blob_clusters", &a.blob_clusters);
    set_opt(doc, "blob_points", &a.blob_points);
    set_opt(doc, "blob_dim", &a.blob_dim);
    set_opt(doc, "blob_separation", &a.blob_separation);
    set_opt(doc, "blob_sigma", &a.blob_sigma);
    set_opt(doc, "data_seed", &a.data_seed);
}

fn read_config(path: &Path) -> Result<KvDoc, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    let doc = KvDoc::parse(&text).map_err(|e| match e {
        Error::Parse { line, message } => {
            Failure::config(format!("{}: line {line}: {message}", path.display()))
        }
        other => Failure::from(other),
    })?;
    doc.reject_unknown(&all_keys())?;
    Ok(doc)
}

impl Settings {
    pub fn for_cluster(args: &ClusterArgs) -> Result<Self, Failure> {
        let mut doc = match &args.run.config {
            Some(p) => read_config(p)?,
            None => KvDoc::new(),
        };
        overlay_run_flags(&mut doc, &args.run);
        set_path(&mut doc, "out_labels", &args.out_labels);
        set_path(&mut doc, "out_metrics", &args.out_metrics);
        set_path(&mut doc, "checkpoint", &args.checkpoint);
        set_path(&mut doc, "resume", &args.resume);
        Self::from_doc(doc)
    }

    /// Sweeps write their own CSV, so per-run outputs are rejected.
    pub fn for_sweep(run: &RunArgs) -> Result<Self, Failure> {
        let mut doc = match &run.config {
            Some(p) => read_config(p)?,
            None => KvDoc::new(),
        };
        overlay_run_flags(&mut doc, run);
        if let Some(key) = OUTPUT_KEYS.iter().find(|k| doc.get(k).is_some()) {
            return Err(Error::Config {
                key: key.to_string(),
                message: "not supported by sweep".into(),
            }
            .into());
        }
        Self::from_doc(doc)
    }

    pub fn from_doc(doc: KvDoc) -> Result<Self, Failure> {
        doc.reject_unknown(&all_keys())?;
        let mut trainer = TrainerConfig::default();
        trainer.apply_kv(&doc)?;

        let path = |key: &str| doc.get(key).map(PathBuf::from);
        let data: String = doc.parse_opt("data")?.ok_or_else(|| Error::Config {
            key: "data".into(),
            message: "no dataset source given (mnist, blobs or csv)".into(),
        })?;
        let source = match data.as_str() {
            "mnist" => DataSource::Mnist {
                images: path("images").unwrap_or_else(|| DEFAULT_IMAGES.into()),
                labels: match path("labels") {
                    Some(p) => Some(p),
                    None if doc.get("images").is_none() => Some(DEFAULT_LABELS.into()),
                    None => None,
                },
            },
            "csv" => DataSource::Csv(path("csv").ok_or_else(|| Error::Config {
                key: "csv".into(),
                message: "data=csv needs a csv path".into(),
            })?),
            "blobs" => DataSource::Blobs {
                clusters: doc.parse_opt("blob_clusters")?.unwrap_or(10),
                points: doc.parse_opt("blob_points")?.unwrap_or(500),
                dim: doc.parse_opt("blob_dim")?.unwrap_or(50),
                separation: doc.parse_opt("blob_separation")?.unwrap_or(10.0),
                sigma: doc.parse_opt("blob_sigma")?.unwrap_or(1.0),
                seed: doc.parse_opt("data_seed")?,
            },
            other => {
                return Err(Error::Config {
                    key: "data".into(),
                    message: format!("unknown source `{other}` (expected mnist|blobs|csv)"),
                }
                .into())
            }
        };

        let limit = doc.parse_opt("limit")?;
        if limit == Some(0) {
            return Err(Error::Config {
                key: "limit".into(),
                message: "must be positive".into(),
            }
            .into());
        }
        let settings = Settings {
            trainer,
            backbone: doc.parse_opt("backbone")?.unwrap_or(BackboneKind::Flatten),
            backbone_dim: doc.parse_opt("backbone_dim")?.unwrap_or(128),
            backbone_seed: doc.parse_opt("backbone_seed")?.unwrap_or(0),
            source,
            limit,
            out_labels: path("out_labels"),
            out_metrics: path("out_metrics"),
            checkpoint: path("checkpoint"),
            resume: path("resume"),
            explicit: doc,
        };
        settings.trainer.validate()?;
        Ok(settings)
    }

    pub fn load_dataset(&self) -> Result<Dataset, Failure> {
        let mut data = match &self.source {
            DataSource::Mnist { images, labels } => load_idx(images, labels.as_deref())?,
            DataSource::Csv(p) => load_csv(p)?,
            DataSource::Blobs {
                clusters,
                points,
                dim,
                separation,
                sigma,
                seed,
            } => {
                let mut rng = SeededRng::new(seed.unwrap_or(self.trainer.seed));
                gen_blobs(*clusters, *points, *dim, *separation, *sigma, &mut rng)?
            }
        };
        if let Some(n) = self.limit {
            data.truncate(n);
        }
        Ok(data)
    }

    pub fn backbone_spec(&self, data: &Dataset) -> BackboneSpec {
        BackboneSpec::for_kind(
            self.backbone,
            data.shape(),
            self.backbone_dim,
            self.backbone_seed,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use driftclust::Mode;

    fn doc(text: &str) -> KvDoc {
        KvDoc::parse(text).unwrap()
    }

    #[test]
    fn defaults_fill_everything_but_data() {
        let s = Settings::from_doc(doc("data=blobs")).unwrap();
        assert_eq!(s.trainer, TrainerConfig::default());
        assert_eq!(s.backbone, BackboneKind::Flatten);
        assert!(matches!(
            s.source,
            DataSource::Blobs {
                clusters: 10,
                points: 500,
                dim: 50,
                seed: None,
                ..
            }
        ));
        let err = Settings::from_doc(KvDoc::new()).unwrap_err();
        assert_eq!(err.code, 2);
        assert!(err.message.contains("`data`"), "{}", err.message);
    }

    #[test]
    fn unknown_and_invalid_keys_name_the_key() {
        for (text, key) in [
            ("data=blobs\nkmm=3", "`kmm`"),
            ("data=blobs\nkm=0", "`km`"),
            ("data=blobs\nmode=fast", "`mode`"),
            ("data=tape", "`data`"),
            ("data=csv", "`csv`"),
        ] {
            let err = Settings::from_doc(doc(text)).unwrap_err();
            assert_eq!(err.code, 2, "{text}");
            assert!(err.message.contains(key), "{text}: {}", err.message);
        }
    }

    #[test]
    fn flags_override_file_override_default() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        fs::write(&cfg, "data=blobs\nkm=5\nmode=baseline1\n").unwrap();
        let args = ClusterArgs {
            run: RunArgs {
                config: Some(cfg),
                km: Some(7),
                ..RunArgs::default()
            },
            out_labels: None,
            out_metrics: None,
            checkpoint: None,
            resume: None,
            stop_after: None,
        };
        let s = Settings::for_cluster(&args).unwrap();
        assert_eq!(s.trainer.k_m, 7);
        assert_eq!(s.trainer.mode, Mode::BaselineI);
        assert_eq!(s.trainer.n_m, 50);
    }

    #[test]
    fn mnist_paths_default_only_together() {
        let s = Settings::from_doc(doc("data=mnist")).unwrap();
        assert_eq!(
            s.source,
            DataSource::Mnist {
                images: DEFAULT_IMAGES.into(),
                labels: Some(DEFAULT_LABELS.into())
            }
        );
        let s = Settings::from_doc(doc("data=mnist\nimages=x.idx")).unwrap();
        assert_eq!(
            s.source,
            DataSource::Mnist {
                images: "x.idx".into(),
                labels: None
            }
        );
    }
}
