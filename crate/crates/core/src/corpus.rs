//! Labeled email corpora: CSV IO, cleaning filter, stratified splitting and
//! synthetic generation.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::preprocess::Preprocessor;
use crate::{Error, Label, Result};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmailRecord {
    pub message: String,
    pub label: Label,
}

impl EmailRecord {
    pub fn new(message: impl Into<String>, label: Label) -> Self {
        EmailRecord {
            message: message.into(),
            label,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    records: Vec<EmailRecord>,
}

impl Corpus {
    pub fn new(records: Vec<EmailRecord>) -> Self {
        Corpus { records }
    }

    pub fn records(&self) -> &[EmailRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<EmailRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Number of records per label; always has an entry for both labels.
    pub fn class_counts(&self) -> BTreeMap<Label, usize> {
        let mut counts: BTreeMap<Label, usize> = Label::ALL.iter().map(|&l| (l, 0)).collect();
        for r in &self.records {
            *counts.entry(r.label).or_default() += 1;
        }
        counts
    }

    pub fn count(&self, label: Label) -> usize {
        self.records.iter().filter(|r| r.label == label).count()
    }

    /// Stable SHA-256 over every (label, message) pair, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for r in &self.records {
            h.update(r.label.as_str().as_bytes());
            h.update([0u8]);
            h.update(r.message.as_bytes());
            h.update([0xffu8]);
        }
        to_hex(&h.finalize())
    }

    pub fn subset(&self, indices: &[usize]) -> Corpus {
        Corpus::new(indices.iter().map(|&i| self.records[i].clone()).collect())
    }
}

pub(crate) fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn find_column(headers: &csv::StringRecord, name: &'static str) -> Result<usize> {
    let mut hits = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| h.trim().trim_start_matches('\u{feff}').eq_ignore_ascii_case(name))
        .map(|(i, _)| i);
    let first = hits.next().ok_or(Error::MissingColumn(name))?;
    if hits.next().is_some() {
        return Err(Error::AmbiguousColumn(name));
    }
    Ok(first)
}

/// Parse a corpus from CSV text with `message` and `label` columns.
pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Corpus> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let msg_col = find_column(&headers, "message")?;
    let label_col = find_column(&headers, "label")?;
    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        // 1-based, counting the header as row 1
        let row_no = i + 2;
        let raw_label = row.get(label_col).unwrap_or("");
        let label = Label::parse(raw_label).ok_or_else(|| Error::BadLabel {
            row: row_no,
            value: raw_label.to_owned(),
        })?;
        let message = row
            .get(msg_col)
            .ok_or_else(|| Error::Invalid(format!("row {row_no}: missing message field")))?;
        records.push(EmailRecord::new(message, label));
    }
    Ok(Corpus::new(records))
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(std::io::BufReader::new(file))
}

pub fn write_csv<W: std::io::Write>(corpus: &Corpus, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["message", "label"])?;
    for r in corpus.records() {
        w.write_record([r.message.as_str(), r.label.as_str()])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn save_csv(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(corpus, std::io::BufWriter::new(file))
}

/// Result of dropping records whose cleaned text is empty.
#[derive(Debug, Clone)]
pub struct FilterOutcome {
    pub corpus: Corpus,
    pub dropped: usize,
    /// Indices into the input corpus of the kept records.
    pub kept: Vec<usize>,
}

impl FilterOutcome {
    /// Set when nothing survived cleaning.
    pub fn is_empty(&self) -> bool {
        self.corpus.is_empty()
    }
}

pub fn filter_clean(corpus: &Corpus, cleaner: &Preprocessor) -> FilterOutcome {
    let mut kept = Vec::new();
    let mut records = Vec::new();
    for (i, r) in corpus.records().iter().enumerate() {
        if !cleaner.clean(&r.message).is_empty() {
            kept.push(i);
            records.push(r.clone());
        }
    }
    FilterOutcome {
        dropped: corpus.len() - records.len(),
        corpus: Corpus::new(records),
        kept,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: DEFAULT_TRAIN_FRACTION,
            seed: DEFAULT_SEED,
        }
    }
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64) -> Result<Self> {
        let s = SplitSpec { train_fraction, seed };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Invalid(format!(
                "train fraction must lie strictly between 0 and 1, got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }

    /// Round-half-up share of `n` for training, kept within `1..=n-1`.
    pub fn train_count(&self, n: usize) -> usize {
        let k = (self.train_fraction * n as f64 + 0.5).floor() as usize;
        k.clamp(1, n.saturating_sub(1).max(1))
    }
}

/// Record indices for each side of a split, in ascending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn partition(&self, corpus: &Corpus) -> (Corpus, Corpus) {
        (corpus.subset(&self.train), corpus.subset(&self.test))
    }

    pub fn write_manifest<W: Write>(&self, mut w: W, spec: &SplitSpec) -> std::io::Result<()> {
        writeln!(
            w,
            "# split manifest: seed={} train_fraction={}",
            spec.seed, spec.train_fraction
        )?;
        for (name, ids) in [("train", &self.train), ("test", &self.test)] {
            writeln!(w, "[{name}]")?;
            for i in ids {
                writeln!(w, "{i}")?;
            }
        }
        Ok(())
    }

    pub fn read_manifest<R: BufRead>(r: R) -> Result<Split> {
        let mut split = Split {
            train: Vec::new(),
            test: Vec::new(),
        };
        let mut section: Option<bool> = None;
        for (n, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<manifest>", e))?;
            let line = line.trim();
            match line {
                "" => {}
                l if l.starts_with('#') => {}
                "[train]" => section = Some(true),
                "[test]" => section = Some(false),
                l => {
                    let idx: usize = l
                        .parse()
                        .map_err(|_| Error::Invalid(format!("manifest line {}: bad index {l:?}", n + 1)))?;
                    match section {
                        Some(true) => split.train.push(idx),
                        Some(false) => split.test.push(idx),
                        None => {
                            return Err(Error::Invalid(format!(
                                "manifest line {}: index outside a section",
                                n + 1
                            )))
                        }
                    }
                }
            }
        }
        Ok(split)
    }
}

/// Per-class seeded shuffle, then the first `train_count(class size)` of each
/// class go to training and the rest to test.
pub fn stratified_split(corpus: &Corpus, spec: &SplitSpec) -> Result<Split> {
    let labels: Vec<Label> = corpus.records.iter().map(|r| r.label).collect();
    stratified_split_labels(&labels, spec)
}

/// [`stratified_split`] over bare labels.
pub fn stratified_split_labels(labels: &[Label], spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for label in Label::ALL {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == label).collect();
        if idx.len() < 2 {
            return Err(Error::ClassTooSmall {
                label,
                count: idx.len(),
            });
        }
        idx.shuffle(&mut rng);
        let k = spec.train_count(idx.len());
        train.extend_from_slice(&idx[..k]);
        test.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

/// Parameters for a synthetic two-cluster corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub n_per_class: usize,
    pub spam_lexicon: Vec<String>,
    pub ham_lexicon: Vec<String>,
    /// Tokens that either class may use.
    pub shared_lexicon: Vec<String>,
    /// Probability that a token comes from the shared pool.
    pub overlap: f64,
    pub min_len: usize,
    pub max_len: usize,
    /// Probability of decorating a message with a leading URL.
    pub url_rate: f64,
}

const SPAM_WORDS: &[&str] = &[
    "gratis",
    "hadiah",
    "promo",
    "diskon",
    "klik",
    "menang",
    "uang",
    "bonus",
    "penawaran",
    "terbatas",
    "segera",
    "daftar",
    "pinjaman",
    "cepat",
    "investasi",
    "untung",
    "jutaan",
    "undian",
    "selamat",
    "kredit",
    "murah",
    "obat",
    "pelangsing",
    "kasino",
    "transfer",
    "rekening",
    "saldo",
    "voucher",
    "cashback",
    "eksklusif",
    "spesial",
    "langganan",
    "produk",
    "jaminan",
    "kaya",
    "peluang",
    "pemenang",
    "hubungi",
    "tawaran",
    "bebas",
];

const HAM_WORDS: &[&str] = &[
    "rapat",
    "laporan",
    "jadwal",
    "proyek",
    "anggaran",
    "kontrak",
    "tim",
    "kantor",
    "presentasi",
    "dokumen",
    "revisi",
    "draf",
    "kuartal",
    "analisis",
    "klien",
    "vendor",
    "persetujuan",
    "karyawan",
    "departemen",
    "manajer",
    "evaluasi",
    "agenda",
    "notulen",
    "pelatihan",
    "kebijakan",
    "prosedur",
    "audit",
    "target",
    "realisasi",
    "koordinasi",
    "divisi",
    "sistem",
    "server",
    "jaringan",
    "sumber",
    "manusia",
    "enron",
    "kontribusi",
    "rencana",
    "diskusi",
];

const SHARED_WORDS: &[&str] = &[
    "email",
    "pesan",
    "hari",
    "minggu",
    "bulan",
    "tahun",
    "informasi",
    "terima",
    "kasih",
    "mohon",
    "silakan",
    "berikut",
    "lampiran",
    "tanggal",
    "waktu",
    "nomor",
    "alamat",
    "orang",
    "baru",
    "besar",
    "semua",
    "kabar",
    "salam",
    "info",
    "catatan",
    "perlu",
    "lihat",
    "kirim",
    "balas",
    "pagi",
];

fn owned(words: &[&str]) -> Vec<String> {
    words.iter().map(|s| s.to_string()).collect()
}

impl SyntheticSpec {
    pub fn new(seed: u64, n_per_class: usize, overlap: f64) -> Self {
        SyntheticSpec {
            seed,
            n_per_class,
            spam_lexicon: owned(SPAM_WORDS),
            ham_lexicon: owned(HAM_WORDS),
            shared_lexicon: owned(SHARED_WORDS),
            overlap,
            min_len: 30,
            max_len: 60,
            url_rate: 0.1,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, lex) in [
            ("spam", &self.spam_lexicon),
            ("ham", &self.ham_lexicon),
            ("shared", &self.shared_lexicon),
        ] {
            if lex.is_empty() || lex.iter().any(|w| w.is_empty()) {
                return Err(Error::Invalid(format!("{name} lexicon must be non-empty")));
            }
        }
        if !(0.0..=1.0).contains(&self.overlap) {
            return Err(Error::Invalid(format!(
                "overlap must lie in [0, 1], got {}",
                self.overlap
            )));
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return Err(Error::Invalid(
                "message length range must satisfy 1 <= min <= max".into(),
            ));
        }
        Ok(())
    }
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec::new(DEFAULT_SEED, 200, 0.2)
    }
}

fn synth_message(rng: &mut ChaCha8Rng, spec: &SyntheticSpec, own: &[String]) -> String {
    let len = rng.gen_range(spec.min_len..=spec.max_len);
    let mut words: Vec<String> = Vec::with_capacity(len + 1);
    if rng.gen_bool(spec.url_rate) {
        words.push(format!("https://link{}.example.com/x", rng.gen_range(0..1000)));
    }
    for _ in 0..len {
        let pool = if rng.gen_bool(spec.overlap) {
            &spec.shared_lexicon
        } else {
            own
        };
        words.push(pool[rng.gen_range(0..pool.len())].clone());
    }
    // Light surface noise so cleaning has work to do.
    let mut msg = words.join(" ");
    if let Some(first) = msg.get(..1) {
        msg = first.to_uppercase() + &msg[1..];
    }
    if rng.gen_bool(0.5) {
        msg.push_str(if rng.gen_bool(0.5) { "!!!" } else { "." });
    }
    msg
}

/// Deterministic two-cluster corpus: `n_per_class` messages per label,
/// alternating ham/spam.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Corpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut records = Vec::with_capacity(2 * spec.n_per_class);
    for _ in 0..spec.n_per_class {
        records.push(EmailRecord::new(
            synth_message(&mut rng, spec, &spec.ham_lexicon),
            Label::Ham,
        ));
        records.push(EmailRecord::new(
            synth_message(&mut rng, spec, &spec.spam_lexicon),
            Label::Spam,
        ));
    }
    Ok(Corpus::new(records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn csv_counts_and_case_insensitive_labels() {
        let text = "message,label\n\"halo, apa kabar\",Spam\npromo gratis,spam\nrapat besok, HAM \n";
        let c = read_csv(text.as_bytes()).unwrap();
        assert_eq!(c.count(Label::Spam), 2);
        assert_eq!(c.count(Label::Ham), 1);
        assert_eq!(c.records()[0].message, "halo, apa kabar");
        assert_eq!(c.records()[0].label, Label::Spam);
    }

    #[test]
    fn csv_bad_label_names_row() {
        let text = "label,message\nham,a\nunknown,b\n";
        match read_csv(text.as_bytes()) {
            Err(Error::BadLabel { row, value }) => {
                assert_eq!(row, 3);
                assert_eq!(value, "unknown");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_column_errors() {
        assert!(matches!(
            read_csv("text,label\na,ham\n".as_bytes()),
            Err(Error::MissingColumn("message"))
        ));
        assert!(matches!(
            read_csv("message,label,Label\na,ham,ham\n".as_bytes()),
            Err(Error::AmbiguousColumn("label"))
        ));
        assert!(matches!(load_csv("/nonexistent/file.csv"), Err(Error::Io { .. })));
    }

    #[test]
    fn csv_extra_columns_ignored() {
        let c = read_csv("id,Message,extra,Label\n1,halo,x,ham\n".as_bytes()).unwrap();
        assert_eq!(c.records(), &[EmailRecord::new("halo", Label::Ham)]);
    }

    #[test]
    fn filter_drops_empty_after_cleaning() {
        let c = Corpus::new(vec![
            EmailRecord::new("https://promo.example.com", Label::Spam),
            EmailRecord::new("halo dunia", Label::Ham),
            EmailRecord::new("12345 !!!", Label::Ham),
        ]);
        let out = filter_clean(&c, &Preprocessor::default());
        assert_eq!(out.dropped, 2);
        assert_eq!(out.kept, vec![1]);
        assert_eq!(out.corpus.records()[0].message, "halo dunia");
        assert!(!out.is_empty());
    }

    #[test]
    fn split_ten_records() {
        let recs = (0..10)
            .map(|i| EmailRecord::new(format!("m{i}"), if i % 2 == 0 { Label::Ham } else { Label::Spam }))
            .collect();
        let c = Corpus::new(recs);
        let s = stratified_split(&c, &SplitSpec::default()).unwrap();
        let (train, test) = s.partition(&c);
        assert_eq!(train.count(Label::Ham), 4);
        assert_eq!(train.count(Label::Spam), 4);
        assert_eq!(test.len(), 2);
    }

    #[test]
    fn split_is_seeded() {
        let c = generate_synthetic(&SyntheticSpec::new(1, 50, 0.3)).unwrap();
        let spec = SplitSpec::new(0.8, 7).unwrap();
        assert_eq!(
            stratified_split(&c, &spec).unwrap(),
            stratified_split(&c, &spec).unwrap()
        );
        let other = stratified_split(&c, &SplitSpec::new(0.8, 8).unwrap()).unwrap();
        assert_ne!(stratified_split(&c, &spec).unwrap(), other);
    }

    #[test]
    fn split_rejects_tiny_class() {
        let c = Corpus::new(vec![
            EmailRecord::new("a", Label::Ham),
            EmailRecord::new("b", Label::Ham),
            EmailRecord::new("c", Label::Spam),
        ]);
        assert!(matches!(
            stratified_split(&c, &SplitSpec::default()),
            Err(Error::ClassTooSmall {
                label: Label::Spam,
                count: 1
            })
        ));
        assert!(SplitSpec::new(1.0, 1).is_err());
        assert!(SplitSpec::new(0.0, 1).is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let s = Split {
            train: vec![0, 2, 5],
            test: vec![1, 3],
        };
        let mut buf = Vec::new();
        s.write_manifest(&mut buf, &SplitSpec::default()).unwrap();
        assert_eq!(Split::read_manifest(&buf[..]).unwrap(), s);
        assert!(Split::read_manifest("7\n".as_bytes()).is_err());
    }

    #[test]
    fn synthetic_counts_and_determinism() {
        let spec = SyntheticSpec::new(3, 100, 0.2);
        let a = generate_synthetic(&spec).unwrap();
        assert_eq!(a.count(Label::Ham), 100);
        assert_eq!(a.count(Label::Spam), 100);
        assert_eq!(a, generate_synthetic(&spec).unwrap());
    }

    #[test]
    fn synthetic_zero_overlap_separates_lexicons() {
        let spec = SyntheticSpec::new(9, 30, 0.0);
        let c = generate_synthetic(&spec).unwrap();
        let pp = Preprocessor::default();
        let mut vocab: BTreeMap<Label, HashSet<String>> = BTreeMap::new();
        for r in c.records() {
            vocab.entry(r.label).or_default().extend(pp.tokens(&r.message));
        }
        assert!(vocab[&Label::Ham].is_disjoint(&vocab[&Label::Spam]));
    }

    #[test]
    fn synthetic_rejects_bad_spec() {
        let mut spec = SyntheticSpec::default();
        spec.spam_lexicon.clear();
        assert!(generate_synthetic(&spec).is_err());
        let spec = SyntheticSpec::new(1, 5, 1.5);
        assert!(generate_synthetic(&spec).is_err());
    }

    #[test]
    fn bundled_lexicons_survive_preprocessing() {
        let pp = Preprocessor::default();
        for w in SPAM_WORDS.iter().chain(HAM_WORDS).chain(SHARED_WORDS) {
            assert_eq!(pp.tokens(w), vec![w.to_string()], "{w} must be a clean non-stopword");
        }
        let spam: HashSet<_> = SPAM_WORDS.iter().collect();
        assert!(HAM_WORDS.iter().all(|w| !spam.contains(w)));
        assert!(SHARED_WORDS.iter().all(|w| !spam.contains(w) && !HAM_WORDS.contains(w)));
    }
}
