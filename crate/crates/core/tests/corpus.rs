use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tagan_core::corpus::{
    frame_labels, load_segments, load_wav, split_manifest, synthesize_clip, synthesize_corpus, Manifest, NonSpeechKind,
    Split, SyntheticSpec,
};
use tagan_core::features::{frame_signal, AudioClip, FrameSpec};
use tagan_core::Error;

fn write_raw_wav(path: &Path, channels: u16, rate: u32, samples: &[i16]) {
    let spec = hound::WavSpec {
        channels,
        sample_rate: rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).unwrap();
    for &s in samples {
        w.write_sample(s).unwrap();
    }
    w.finalize().unwrap();
}

#[test]
fn wav_scaling_and_format_checks() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.wav");
    write_raw_wav(&p, 1, 8000, &[-32768, 16384, 0, 32767]);
    let clip = load_wav(&p).unwrap();
    assert_eq!(clip.samples[..3], [-1.0, 0.5, 0.0]);
    assert_eq!(clip.sample_rate_hz, 8000);

    let stereo = dir.path().join("s.wav");
    write_raw_wav(&stereo, 2, 8000, &[0; 8]);
    assert!(matches!(load_wav(&stereo), Err(Error::UnsupportedFormat(_))));

    let odd = dir.path().join("r.wav");
    write_raw_wav(&odd, 1, 22050, &[0; 8]);
    assert!(matches!(load_wav(&odd), Err(Error::UnsupportedFormat(_))));

    let wide = dir.path().join("w.wav");
    write_raw_wav(&wide, 1, 16000, &[1000; 1600]);
    let c = load_wav(&wide).unwrap();
    assert_eq!((c.sample_rate_hz, c.samples.len()), (8000, 800));

    let junk = dir.path().join("j.wav");
    std::fs::write(&junk, b"RIFF\x10\x00\x00\x00WAVEjunkjunk").unwrap();
    let r = load_wav(&junk);
    assert!(matches!(r, Err(Error::CorruptHeader(_)) | Err(Error::UnsupportedFormat(_))), "{r:?}");
}

fn tree_bytes(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for sub in ["audio", "labels"] {
        let mut names: Vec<_> = std::fs::read_dir(root.join(sub)).unwrap().map(|e| e.unwrap().path()).collect();
        names.sort();
        for n in names {
            out.push((n.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&n).unwrap()));
        }
    }
    out.push(("manifest".into(), std::fs::read(root.join("manifest.tsv")).unwrap()));
    out
}

#[test]
fn synthesis_is_byte_reproducible() {
    let spec = SyntheticSpec {
        clips: 10,
        ..SyntheticSpec::default()
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    synthesize_corpus(&spec, a.path()).unwrap();
    synthesize_corpus(&spec, b.path()).unwrap();
    assert_eq!(tree_bytes(a.path()), tree_bytes(b.path()));

    let m = Manifest::load(&a.path().join("manifest.tsv")).unwrap();
    assert_eq!(m.entries.len(), 10);
    let e = &m.entries[0];
    let clip = load_wav(&m.audio_path(e)).unwrap();
    let segs = load_segments(&m.labels_path(e)).unwrap();
    assert_eq!(clip.samples.len(), 32000);
    assert!((segs.last().unwrap().end_sec - 4.0).abs() < 1e-9);
}

#[test]
fn hundred_clips_split_seventy_twenty_ten() {
    let spec = SyntheticSpec {
        clips: 100,
        clip_secs: 0.2,
        segment_min_secs: 0.05,
        segment_max_secs: 0.1,
        ..SyntheticSpec::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let m = synthesize_corpus(&spec, dir.path()).unwrap();
    let count = |s| m.split(s).count();
    assert_eq!((count(Split::Train), count(Split::Test), count(Split::Val)), (70, 20, 10));
    let again = split_manifest(&m, [0.7, 0.2, 0.1], spec.seed).unwrap();
    assert_eq!(again, m);
    assert!(matches!(split_manifest(&m, [0.5, 0.2, 0.2], 1), Err(Error::BadRatios(_))));
}

#[test]
fn manifest_requires_existing_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("manifest.tsv");
    std::fs::write(&p, "a\taudio/a.wav\tlabels/a.txt\ttrain\n").unwrap();
    assert!(matches!(Manifest::load(&p), Err(Error::Io { .. })));
    std::fs::write(&p, "a\tx\ty\tholdout\n").unwrap();
    assert!(matches!(Manifest::load(&p), Err(Error::Parse { line: 1, .. })));
}

fn frame_energy(clip: &AudioClip) -> Vec<f64> {
    frame_signal(clip, &FrameSpec::default())
        .unwrap()
        .iter()
        .map(|f| f.iter().map(|v| v * v).sum::<f64>() / f.len() as f64)
        .collect()
}

/// Mean power in 100-1000 Hz by direct DFT over the frame.
fn band_energy(frame: &[f64]) -> f64 {
    let n = frame.len() as f64;
    let mut total = 0.0;
    for k in 3..=25 {
        let f = k as f64 * 8000.0 / n;
        if !(100.0..=1000.0).contains(&f) {
            continue;
        }
        let (mut re, mut im) = (0.0, 0.0);
        for (i, &x) in frame.iter().enumerate() {
            let a = 2.0 * std::f64::consts::PI * k as f64 * i as f64 / n;
            re += x * a.cos();
            im -= x * a.sin();
        }
        total += re * re + im * im;
    }
    total
}

fn speech_vs_silence(snr: f64) -> SyntheticSpec {
    SyntheticSpec {
        nonspeech: vec![NonSpeechKind::Silence],
        snr_min_db: snr,
        snr_max_db: snr,
        ..SyntheticSpec::default()
    }
}

#[test]
fn energy_threshold_recovers_labels_at_high_snr() {
    let spec = speech_vs_silence(30.0);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let frame = FrameSpec::default();
    let (mut wrong, mut total) = (0usize, 0usize);
    for i in 0..10 {
        let c = synthesize_clip(&spec, i, &mut rng);
        let energy = frame_energy(&c.clip);
        let labels = frame_labels(&c.segments, energy.len(), &frame);
        let peak = energy.iter().cloned().fold(0.0, f64::max);
        for (e, l) in energy.iter().zip(&labels) {
            wrong += ((*e > 3e-3 * peak) as u8 != *l) as usize;
            total += 1;
        }
    }
    assert!((wrong as f64 / total as f64) < 0.10, "{wrong}/{total}");
}

#[test]
fn speech_frames_carry_more_band_energy_than_silence() {
    for snr in [20.0, 25.0] {
        let spec = speech_vs_silence(snr);
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let frame = FrameSpec::default();
        for i in 0..4 {
            let c = synthesize_clip(&spec, i, &mut rng);
            let frames = frame_signal(&c.clip, &frame).unwrap();
            let labels = frame_labels(&c.segments, frames.len(), &frame);
            let mean = |want: u8| {
                let v: Vec<f64> = frames
                    .iter()
                    .zip(&labels)
                    .filter(|(_, l)| **l == want)
                    .map(|(f, _)| band_energy(f))
                    .collect();
                v.iter().sum::<f64>() / v.len() as f64
            };
            assert!(mean(1) > mean(0));
        }
    }
}
