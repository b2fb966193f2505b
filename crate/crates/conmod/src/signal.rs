//! Mono audio buffers, test-signal generators and WAV I/O.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Mono audio with an attached sample rate. All samples are finite; this is
/// checked at construction so downstream DSP can assume it.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::invalid("sample_rate must be positive"));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite(format!(
                "audio sample at index {i} is not finite"
            )));
        }
        Ok(AudioBuffer {
            samples,
            sample_rate,
        })
    }

    pub fn silence(len: usize, sample_rate: u32) -> Result<Self> {
        AudioBuffer::new(vec![0.0; len], sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }
}

/// One first-order all-pass pass over `x` with a fixed coefficient:
/// `y[n] = p*x[n] + x[n-1] - p*y[n-1]`. Unity magnitude response at every
/// frequency, so signal energy is preserved.
pub fn first_order_allpass_static(x: &AudioBuffer, p: f64) -> Result<AudioBuffer> {
    if !(p.is_finite() && p.abs() < 1.0) {
        return Err(Error::invalid(format!(
            "all-pass coefficient must satisfy |p| < 1, got {p}"
        )));
    }
    let mut out = x.samples.clone();
    allpass_in_place(&mut out, p);
    AudioBuffer::new(out, x.sample_rate)
}

fn allpass_in_place(s: &mut [f64], p: f64) {
    let mut x1 = 0.0;
    let mut y1 = 0.0;
    for v in s.iter_mut() {
        let x0 = *v;
        let y0 = p * x0 + x1 - p * y1;
        *v = y0;
        x1 = x0;
        y1 = y0;
    }
}

/// Impulse train smeared by a chain of identical first-order all-pass
/// filters. Each impulse becomes a short descending chirp, giving a signal
/// that excites every frequency while staying sparse in time.
pub fn generate_chirp_train(
    duration_s: f64,
    impulse_period_s: f64,
    num_allpass: usize,
    coeff: f64,
    sample_rate: u32,
) -> Result<AudioBuffer> {
    if sample_rate == 0 {
        return Err(Error::invalid("sample_rate must be positive"));
    }
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::invalid("duration_s must be positive"));
    }
    if !(impulse_period_s.is_finite() && impulse_period_s > 0.0) {
        return Err(Error::invalid("impulse_period_s must be positive"));
    }
    if !(coeff.is_finite() && coeff.abs() < 1.0) {
        return Err(Error::invalid(format!(
            "all-pass coefficient must satisfy |p| < 1, got {coeff}"
        )));
    }
    let len = (duration_s * sample_rate as f64).round() as usize;
    let period = (impulse_period_s * sample_rate as f64).round() as usize;
    if period == 0 {
        return Err(Error::invalid(
            "impulse period rounds to zero samples at this sample rate",
        ));
    }
    let mut s = vec![0.0; len];
    let mut i = 0;
    while i < len {
        s[i] = 1.0;
        i += period;
    }
    for _ in 0..num_allpass {
        allpass_in_place(&mut s, coeff);
    }
    AudioBuffer::new(s, sample_rate)
}

/// Deterministic evaluation signal: a train of exponentially decaying sine
/// bursts with seeded random pitch, level and decay. Distinct seeds give
/// distinct signals; the same seed is bit-reproducible.
pub fn generate_test_signal(duration_s: f64, sample_rate: u32, seed: u64) -> Result<AudioBuffer> {
    if sample_rate == 0 {
        return Err(Error::invalid("sample_rate must be positive"));
    }
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::invalid("duration_s must be positive"));
    }
    let len = (duration_s * sample_rate as f64).round() as usize;
    let sr = sample_rate as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let burst_len = (0.25 * sr).round() as usize;
    let burst_len = burst_len.max(1);
    let mut s = vec![0.0; len];
    let mut start = 0;
    while start < len {
        // Log-uniform pitch keeps low and high registers equally represented.
        let f = 80.0 * (8000.0f64 / 80.0).powf(rng.random_range(0.0..1.0));
        let amp = rng.random_range(0.25..0.9);
        let tau = rng.random_range(0.05..0.2);
        let end = (start + burst_len).min(len);
        for (k, v) in s[start..end].iter_mut().enumerate() {
            let t = k as f64 / sr;
            *v = amp * (-t / tau).exp() * (2.0 * std::f64::consts::PI * f * t).sin();
        }
        start = end;
    }
    AudioBuffer::new(s, sample_rate)
}

// --- WAV I/O ------------------------------------------------------------

/// Writes mono IEEE float32 WAV.
pub fn wav_write(path: impl AsRef<Path>, audio: &AudioBuffer) -> Result<()> {
    let n = audio.samples.len();
    let data_bytes = (n * 4) as u32;
    let mut buf = Vec::with_capacity(44 + n * 4);
    buf.extend_from_slice(b"RIFF");
    buf.extend_from_slice(&(36 + data_bytes).to_le_bytes());
    buf.extend_from_slice(b"WAVE");
    buf.extend_from_slice(b"fmt ");
    buf.extend_from_slice(&16u32.to_le_bytes());
    buf.extend_from_slice(&3u16.to_le_bytes()); // IEEE float
    buf.extend_from_slice(&1u16.to_le_bytes()); // mono
    buf.extend_from_slice(&audio.sample_rate.to_le_bytes());
    buf.extend_from_slice(&(audio.sample_rate * 4).to_le_bytes());
    buf.extend_from_slice(&4u16.to_le_bytes());
    buf.extend_from_slice(&32u16.to_le_bytes());
    buf.extend_from_slice(b"data");
    buf.extend_from_slice(&data_bytes.to_le_bytes());
    for s in &audio.samples {
        buf.extend_from_slice(&(*s as f32).to_le_bytes());
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

/// Reads a WAV file. Accepts PCM16, PCM24 and float32, mono or stereo
/// (stereo is averaged to mono). Anything else is rejected with a clear
/// error rather than decoded approximately.
pub fn wav_read(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let ctx = path.display();
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::Wav(format!("{ctx}: not a RIFF/WAVE file")));
    }

    struct Fmt {
        format: u16,
        channels: u16,
        sample_rate: u32,
        bits: u16,
    }
    let mut fmt: Option<Fmt> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_start = pos + 8;
        if body_start + size > bytes.len() {
            return Err(Error::Wav(format!(
                "{ctx}: chunk {:?} declares {size} bytes but file is truncated",
                String::from_utf8_lossy(id)
            )));
        }
        let body = &bytes[body_start..body_start + size];
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(Error::Wav(format!("{ctx}: fmt chunk too short")));
                }
                fmt = Some(Fmt {
                    format: u16::from_le_bytes(body[0..2].try_into().unwrap()),
                    channels: u16::from_le_bytes(body[2..4].try_into().unwrap()),
                    sample_rate: u32::from_le_bytes(body[4..8].try_into().unwrap()),
                    bits: u16::from_le_bytes(body[14..16].try_into().unwrap()),
                });
            }
            b"data" => data = Some(body),
            _ => {}
        }
        pos = body_start + size + (size & 1); // chunks are word-aligned
    }
    let fmt = fmt.ok_or_else(|| Error::Wav(format!("{ctx}: missing fmt chunk")))?;
    let data = data.ok_or_else(|| Error::Wav(format!("{ctx}: missing data chunk")))?;
    if fmt.sample_rate == 0 {
        return Err(Error::Wav(format!("{ctx}: sample rate is zero")));
    }
    let ch = fmt.channels as usize;
    if !(1..=2).contains(&ch) {
        return Err(Error::Wav(format!(
            "{ctx}: {ch} channels unsupported (mono or stereo only)"
        )));
    }

    let decode = |bytes_per: usize, f: &dyn Fn(&[u8]) -> f64| -> Result<Vec<f64>> {
        let frame = bytes_per * ch;
        if data.len() % frame != 0 {
            return Err(Error::Wav(format!(
                "{ctx}: data chunk length {} is not a whole number of frames",
                data.len()
            )));
        }
        Ok(data
            .chunks_exact(frame)
            .map(|fr| {
                let mut acc = 0.0;
                for c in 0..ch {
                    acc += f(&fr[c * bytes_per..(c + 1) * bytes_per]);
                }
                acc / ch as f64
            })
            .collect())
    };

    let samples = match (fmt.format, fmt.bits) {
        (1, 16) => decode(2, &|b| {
            i16::from_le_bytes(b.try_into().unwrap()) as f64 / 32768.0
        })?,
        (1, 24) => decode(3, &|b| {
            let v = ((b[2] as i32) << 16 | (b[1] as i32) << 8 | b[0] as i32) << 8 >> 8;
            v as f64 / 8388608.0
        })?,
        (3, 32) => decode(4, &|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)?,
        (f, b) => {
            return Err(Error::Wav(format!(
                "{ctx}: unsupported codec (format {f}, {b} bits); expected PCM16, PCM24 or float32"
            )))
        }
    };
    AudioBuffer::new(samples, fmt.sample_rate)
}
