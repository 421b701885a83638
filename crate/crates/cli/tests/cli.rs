use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use semvid::codecs::pose::Keypoint;
use semvid::codecs::{quantize_pose, toy_decode, toy_encode, PoseSequence, ToyCodecParams};
use semvid::container::{bpp, demux, ModalityId};
use semvid::metrics::{ingest_scores, psnr, ssim};
use semvid::rvid;
use semvid::scaffold::FillMode;
use semvid::synth::gradient_noise;
use semvid_cli::exit;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_semvid");

fn semvid(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = semvid(args);
    assert!(
        out.status.success(),
        "semvid {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    semvid(args).status.code().unwrap()
}

fn field(stdout: &str, key: &str) -> String {
    stdout
        .lines()
        .filter(|l| l.starts_with("#METRIC "))
        .flat_map(|l| l.split_whitespace())
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {stdout}"))
        .to_string()
}

struct Work {
    dir: TempDir,
}

impl Work {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn s(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }

    fn clip(&self, name: &str, w: usize, h: usize, n: usize) -> String {
        rvid::write_file(self.path(name), &gradient_noise(w, h, n, 12, 7)).unwrap();
        self.s(name)
    }
}

fn fixture() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures/hevc_b_disco.csv")
        .to_string_lossy()
        .into_owned()
}

#[test]
fn encode_echoes_config_and_bpp() {
    let w = Work::new();
    let clip = w.clip("in.rvid", 96, 64, 9);
    fs::write(w.path("cap.txt"), "a test caption").unwrap();
    let out = ok(&[
        "encode",
        "--input",
        &clip,
        "--caption",
        &w.s("cap.txt"),
        "--output",
        &w.s("o.dsc"),
        "--ds",
        "2",
        "--dt",
        "4",
        "--qp",
        "16",
        "--ratio",
        "5",
        "--fill",
        "zero",
    ]);
    let bytes = fs::read(w.path("o.dsc")).unwrap();
    let c = demux(&bytes).unwrap();
    assert_eq!((c.meta.width, c.meta.height, c.meta.frame_count), (96, 64, 9));
    assert_eq!((c.meta.spatial_factor, c.meta.temporal_factor), (2, 4));
    assert_eq!((c.meta.fill_mode, c.meta.ratio, c.meta.qp), (FillMode::Zero, 5, 16));

    let printed: f64 = field(&out, "bpp").parse().unwrap();
    assert_eq!(printed, bpp(8 * bytes.len() as u64, 96, 64, 9));
    let inspected = ok(&["inspect", &w.s("o.dsc")]);
    assert_eq!(field(&inspected, "bpp"), field(&out, "bpp"));
    assert_eq!(field(&inspected, "streams"), "text,video");
}

#[test]
fn encode_is_deterministic() {
    let w = Work::new();
    let clip = w.clip("in.rvid", 64, 48, 7);
    for o in ["a.dsc", "b.dsc"] {
        ok(&["encode", "--input", &clip, "--output", &w.s(o), "--ds", "2"]);
    }
    assert_eq!(fs::read(w.path("a.dsc")).unwrap(), fs::read(w.path("b.dsc")).unwrap());
}

#[test]
fn decode_restores_shape_and_caption() {
    let w = Work::new();
    let clip = w.clip("in.rvid", 70, 50, 11);
    let caption = "zwei Hunde am Strand, 夕焼け\nsecond line";
    fs::write(w.path("cap.txt"), caption).unwrap();
    ok(&[
        "encode",
        "--input",
        &clip,
        "--caption",
        &w.s("cap.txt"),
        "--output",
        &w.s("o.dsc"),
        "--ds",
        "2",
        "--dt",
        "4",
    ]);
    let out = ok(&["decode", "--input", &w.s("o.dsc"), "--output", &w.s("s.rvid")]);
    let s = rvid::read_file(w.path("s.rvid")).unwrap();
    assert_eq!((s.width(), s.height(), s.frame_count()), (70, 50, 11));
    assert_eq!(fs::read(w.path("s.caption.txt")).unwrap(), caption.as_bytes());
    // 1 + ceil(10 / 8) latent frames of ceil(50 / 32) x ceil(70 / 32)
    assert_eq!(field(&out, "tokens"), "18");
    let mask = fs::read_to_string(w.path("s.mask.txt")).unwrap();
    assert_eq!(mask, "18 3\nVAAAVAAAVAAAVAAAVA\n");
}

#[test]
fn near_lossless_setting() {
    let w = Work::new();
    let clip = w.clip("in.rvid", 64, 64, 6);
    let cfg = ["--ds", "1", "--dt", "1", "--toy-q", "1"];
    let mut enc = vec!["encode", "--input", &clip[..], "--output"];
    let o = w.s("o.dsc");
    enc.push(&o);
    enc.extend(cfg);
    ok(&enc);
    ok(&["decode", "--input", &o, "--output", &w.s("s.rvid")]);
    let p = psnr(
        &rvid::read_file(&clip).unwrap(),
        &rvid::read_file(w.path("s.rvid")).unwrap(),
    )
    .unwrap();
    assert!(p >= 45.0, "{p}");
}

#[test]
fn optional_streams_and_sidecars() {
    let w = Work::new();
    let clip = w.clip("in.rvid", 64, 64, 5);
    let sketch = w.clip("sketch.rvid", 64, 64, 5);
    let seq = PoseSequence {
        width: 64,
        height: 64,
        keypoints_per_pose: 18,
        frames: (0..5)
            .map(|f| {
                vec![(0..18)
                    .map(|k| Keypoint::new(10.0 + k as f64 * 2.0, 5.0 + f as f64 * 3.0))
                    .collect()]
            })
            .collect(),
    };
    fs::write(w.path("pose.json"), seq.to_json()).unwrap();

    ok(&["encode", "--input", &clip, "--output", &w.s("v.dsc")]);
    assert_eq!(field(&ok(&["inspect", &w.s("v.dsc")]), "streams"), "video");

    ok(&[
        "encode",
        "--input",
        &clip,
        "--output",
        &w.s("all.dsc"),
        "--pose",
        &w.s("pose.json"),
        "--sketch",
        &sketch,
    ]);
    let inspected = ok(&["inspect", &w.s("all.dsc")]);
    assert_eq!(field(&inspected, "streams"), "video,sketch,pose");
    let c = demux(&fs::read(w.path("all.dsc")).unwrap()).unwrap();
    assert!(c.stream(ModalityId::Text).is_none());

    let topo = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/openpose18.topology");
    ok(&[
        "decode",
        "--input",
        &w.s("all.dsc"),
        "--output",
        &w.s("d.rvid"),
        "--render-pose",
        "--topology",
        &topo.to_string_lossy(),
    ]);
    let back = PoseSequence::from_json(&fs::read_to_string(w.path("d.pose.json")).unwrap()).unwrap();
    assert_eq!(quantize_pose(&back), quantize_pose(&seq));
    let render = rvid::read_file(w.path("d.pose.rvid")).unwrap();
    assert_eq!((render.width(), render.height(), render.frame_count()), (64, 64, 5));
    let sk = rvid::read_file(w.path("d.sketch.rvid")).unwrap();
    assert_eq!((sk.width(), sk.height(), sk.frame_count()), (64, 64, 5));
    assert!(!w.path("d.caption.txt").exists());
}

#[test]
fn pose_commands_round_trip() {
    let w = Work::new();
    let seq = PoseSequence {
        width: 320,
        height: 240,
        keypoints_per_pose: 18,
        frames: vec![vec![vec![Keypoint::new(100.4, 80.6); 18], vec![Keypoint::hidden(); 18]]; 3],
    };
    fs::write(w.path("p.json"), seq.to_json()).unwrap();
    let out = ok(&["pose-enc", "--input", &w.s("p.json"), "--output", &w.s("p.dpos")]);
    assert_eq!(field(&out, "raw_bytes"), (12 + 3 * (1 + 2 * 18 * 4)).to_string());
    ok(&[
        "pose-dec",
        "--input",
        &w.s("p.dpos"),
        "--output",
        &w.s("q.json"),
        "--render",
        &w.s("r.rvid"),
    ]);
    let back = PoseSequence::from_json(&fs::read_to_string(w.path("q.json")).unwrap()).unwrap();
    assert_eq!(back, PoseSequence::from(&quantize_pose(&seq)));
    assert_eq!(rvid::read_file(w.path("r.rvid")).unwrap().frame_count(), 3);
}

#[test]
fn plan_interleave_reports_hazards() {
    let w = Work::new();
    let out = ok(&[
        "plan-interleave",
        "--frames",
        "57",
        "--width",
        "512",
        "--height",
        "512",
        "--output",
        &w.s("m.txt"),
    ]);
    assert_eq!(field(&out, "tokens"), "2048");
    assert_eq!(field(&out, "video_tokens"), "512");
    assert_eq!(field(&out, "hazard_frames"), "0");

    let alternating: String = (0..2048).map(|i| if (i / 256) % 2 == 0 { 'V' } else { 'A' }).collect();
    fs::write(w.path("alt.txt"), format!("2048 1\n{alternating}\n")).unwrap();
    let out = ok(&[
        "plan-interleave",
        "--frames",
        "57",
        "--width",
        "512",
        "--height",
        "512",
        "--check",
        &w.s("alt.txt"),
    ]);
    assert_eq!(field(&out, "hazard_frames"), "8");
    assert_eq!(field(&out, "periodic"), "false");
}

#[test]
fn evaluate_rows() {
    let w = Work::new();
    let a = w.clip("a.rvid", 32, 24, 3);
    let csv = w.s("rd.csv");
    let out = ok(&[
        "evaluate",
        "--reference",
        &a,
        "--reconstruction",
        &a,
        "--bits",
        "1000",
        "--csv",
        &csv,
        "--method",
        "same",
    ]);
    assert_eq!(field(&out, "psnr"), "inf");
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("same,psnr,"));
    assert!(text.lines().nth(1).unwrap().contains(",inf,"));

    rvid::write_file(w.path("b.rvid"), &gradient_noise(32, 24, 3, 30, 99)).unwrap();
    ok(&[
        "evaluate",
        "--reference",
        &a,
        "--reconstruction",
        &w.s("b.rvid"),
        "--bits",
        "2000",
        "--csv",
        &csv,
        "--method",
        "other",
        "--qp",
        "8",
    ]);
    let curves = ingest_scores(&csv).unwrap();
    let ra = rvid::read_file(&a).unwrap();
    let rb = rvid::read_file(w.path("b.rvid")).unwrap();
    let other_psnr = curves
        .iter()
        .find(|c| c.method == "other" && c.metric == "psnr")
        .unwrap();
    let other_ssim = curves
        .iter()
        .find(|c| c.method == "other" && c.metric == "ssim")
        .unwrap();
    assert_eq!(other_psnr.points[0].score, psnr(&ra, &rb).unwrap());
    assert_eq!(other_ssim.points[0].score, ssim(&ra, &rb).unwrap());
    assert_eq!(other_psnr.points[0].bpp, bpp(2000, 32, 24, 3));
    assert_eq!(other_psnr.points[0].qp, 8);

    let small = w.clip("small.rvid", 16, 24, 3);
    assert_eq!(
        code(&[
            "evaluate",
            "--reference",
            &a,
            "--reconstruction",
            &small,
            "--bits",
            "1",
            "--csv",
            &csv,
            "--method",
            "x"
        ]),
        exit::METRICS
    );
}

#[test]
fn bdrate_and_plot_on_published_table() {
    let w = Work::new();
    let fx = fixture();
    let out = ok(&["bdrate", "--anchor", &fx, "--test", &fx, "--output", &w.s("bd.csv")]);
    assert_eq!(out.lines().count(), 6);
    assert!(out.lines().all(|l| l.ends_with("bdrate_percent=0.000000")));

    let doubled: String = fs::read_to_string(&fx)
        .unwrap()
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i == 0 {
                format!("{l}\n")
            } else {
                let mut f: Vec<String> = l.split(',').map(str::to_string).collect();
                f[0] = "doubled".into();
                f[2] = (f[2].parse::<f64>().unwrap() * 2.0).to_string();
                format!("{}\n", f.join(","))
            }
        })
        .collect();
    fs::write(w.path("doubled.csv"), doubled).unwrap();
    let out = ok(&[
        "bdrate",
        "--anchor",
        &fx,
        "--test",
        &w.s("doubled.csv"),
        "--metric",
        "lpips",
    ]);
    let bd: f64 = field(&out, "bdrate_percent").parse().unwrap();
    assert!((bd - 100.0).abs() < 1e-3, "{bd}");

    let out = ok(&[
        "plot",
        &fx,
        "--metric",
        "lpips",
        "--output",
        &w.s("p.svg"),
        "--csv-out",
        &w.s("p.csv"),
    ]);
    assert_eq!(
        (field(&out, "curves").as_str(), field(&out, "points").as_str()),
        ("1", "9")
    );
    let svg = fs::read_to_string(w.path("p.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("disco/lpips"));
    let again = w.s("p2.svg");
    ok(&["plot", &fx, "--metric", "lpips", "--output", &again]);
    assert_eq!(svg, fs::read_to_string(&again).unwrap());
    let lpips = &ingest_scores(w.path("p.csv")).unwrap()[0];
    let scores: Vec<f64> = lpips.points.iter().map(|p| p.score).collect();
    assert_eq!(
        scores,
        [0.5104, 0.3789, 0.3158, 0.2782, 0.2571, 0.2114, 0.1735, 0.1438, 0.1230]
    );
}

#[test]
fn external_adapter_matches_in_process_toy_codec() {
    let w = Work::new();
    let clip = w.clip("in.rvid", 48, 40, 6);
    let enc_cmd = format!("'{BIN}' toy-enc --input {{in}} --output {{out}} --q 8");
    let dec_cmd = format!("'{BIN}' toy-dec --input {{in}} --output {{out}}");
    for (codec, out) in [("external", "ext.dsc"), ("toy", "toy.dsc")] {
        ok(&[
            "encode",
            "--input",
            &clip,
            "--output",
            &w.s(out),
            "--ds",
            "2",
            "--toy-q",
            "8",
            "--codec",
            codec,
            "--ext-encode",
            &enc_cmd,
            "--ext-decode",
            &dec_cmd,
            "--ext-workdir",
            &w.s(""),
        ]);
    }
    assert_eq!(
        fs::read(w.path("ext.dsc")).unwrap(),
        fs::read(w.path("toy.dsc")).unwrap()
    );
    for (codec, out) in [("external", "ext.rvid"), ("toy", "toy.rvid")] {
        ok(&[
            "decode",
            "--input",
            &w.s("toy.dsc"),
            "--output",
            &w.s(out),
            "--codec",
            codec,
            "--ext-encode",
            &enc_cmd,
            "--ext-decode",
            &dec_cmd,
        ]);
    }
    assert_eq!(
        fs::read(w.path("ext.rvid")).unwrap(),
        fs::read(w.path("toy.rvid")).unwrap()
    );

    let bits = toy_encode(&rvid::read_file(&clip).unwrap(), &ToyCodecParams::new(8, true).unwrap()).unwrap();
    fs::write(w.path("direct.toy"), &bits).unwrap();
    ok(&[
        "toy-dec",
        "--input",
        &w.s("direct.toy"),
        "--output",
        &w.s("direct.rvid"),
    ]);
    assert_eq!(
        rvid::read_file(w.path("direct.rvid")).unwrap(),
        toy_decode(&bits).unwrap()
    );
}

#[test]
fn config_file_and_flag_precedence() {
    let w = Work::new();
    let clip = w.clip("in.rvid", 64, 64, 9);
    fs::write(w.path("run.cfg"), "# run\nds = 4\ndt = 8\nratio = 1\n").unwrap();
    ok(&[
        "encode",
        "--input",
        &clip,
        "--output",
        &w.s("o.dsc"),
        "--config",
        &w.s("run.cfg"),
        "--dt",
        "2",
    ]);
    let c = demux(&fs::read(w.path("o.dsc")).unwrap()).unwrap();
    assert_eq!((c.meta.spatial_factor, c.meta.temporal_factor, c.meta.ratio), (4, 2, 1));
}

#[test]
fn exit_codes_by_failure_class() {
    let w = Work::new();
    let clip = w.clip("in.rvid", 32, 32, 3);
    assert_eq!(code(&["inspect"]), exit::USAGE);
    assert_eq!(code(&["inspect", &w.s("missing.dsc")]), exit::IO);
    fs::write(w.path("junk.dsc"), b"DSC0 not really").unwrap();
    assert_eq!(code(&["inspect", &w.s("junk.dsc")]), exit::FORMAT);
    assert_eq!(
        code(&[
            "encode",
            "--input",
            &clip,
            "--output",
            &w.s("o.dsc"),
            "--fill",
            "sideways"
        ]),
        exit::CONFIG
    );
    assert_eq!(
        code(&["encode", "--input", &clip, "--output", &w.s("o.dsc"), "--ds", "0"]),
        exit::CONFIG
    );
    assert_eq!(
        code(&[
            "encode",
            "--input",
            &clip,
            "--output",
            &w.s("o.dsc"),
            "--codec",
            "external",
            "--ext-encode",
            "exit 9 {in} {out}",
            "--ext-decode",
            "cp {in} {out}",
        ]),
        exit::EXTERNAL
    );
    ok(&["encode", "--input", &clip, "--output", &w.s("o.dsc")]);
    let mut bytes = fs::read(w.path("o.dsc")).unwrap();
    let n = bytes.len();
    // corrupt the toy bitstream magic inside the video payload
    bytes[22 + 5] ^= 0xff;
    fs::write(w.path("bad.dsc"), &bytes).unwrap();
    assert_eq!(
        code(&["decode", "--input", &w.s("bad.dsc"), "--output", &w.s("x.rvid")]),
        exit::CODEC
    );
    assert!(n > 27);
}
