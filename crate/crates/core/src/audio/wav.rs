//! WAV ingest: PCM 8/16/24/32-bit integer or 32-bit float, any channel
//! count, any rate. Channels are averaged and the result is linearly
//! resampled to 16 kHz.

use std::io::Read;
use std::path::Path;

use hound::{SampleFormat, WavReader};

use super::{AudioBuffer, AudioError, SAMPLE_RATE};

pub fn read_wav(path: &Path) -> Result<AudioBuffer, AudioError> {
    let reader = WavReader::open(path).map_err(|e| AudioError::Wav {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    decode(reader, &path.display().to_string())
}

pub fn read_wav_from<R: Read>(source: R) -> Result<AudioBuffer, AudioError> {
    let reader = WavReader::new(source).map_err(|e| AudioError::Wav {
        path: "<stream>".into(),
        message: e.to_string(),
    })?;
    decode(reader, "<stream>")
}

fn decode<R: Read>(mut reader: WavReader<R>, origin: &str) -> Result<AudioBuffer, AudioError> {
    let spec = reader.spec();
    let wav_err = |e: hound::Error| AudioError::Wav {
        path: origin.to_string(),
        message: e.to_string(),
    };
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(wav_err)?,
        (SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = (1_i64 << (bits - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) / scale))
                .collect::<Result<_, _>>()
                .map_err(wav_err)?
        }
        (format, bits) => {
            return Err(AudioError::Wav {
                path: origin.to_string(),
                message: format!("unsupported sample format {format:?} with {bits} bits"),
            })
        }
    };
    let channels = usize::from(spec.channels.max(1));
    let mono: Vec<f64> = interleaved
        .chunks(channels)
        .map(|frame| frame.iter().sum::<f64>() / frame.len() as f64)
        .collect();
    let resampled = resample_linear(&mono, spec.sample_rate, SAMPLE_RATE);
    let samples = resampled.into_iter().map(|v| v.clamp(-1.0, 1.0) as f32).collect();
    AudioBuffer::new(samples, SAMPLE_RATE)
}

/// Linear-interpolation resampler.
pub fn resample_linear(input: &[f64], from_rate: u32, to_rate: u32) -> Vec<f64> {
    if input.is_empty() || from_rate == to_rate || from_rate == 0 {
        return input.to_vec();
    }
    let ratio = f64::from(from_rate) / f64::from(to_rate);
    let out_len = ((input.len() as f64) / ratio).round().max(1.0) as usize;
    (0..out_len)
        .map(|i| {
            let pos = i as f64 * ratio;
            let idx = pos.floor() as usize;
            let frac = pos - idx as f64;
            match (input.get(idx), input.get(idx + 1)) {
                (Some(a), Some(b)) => a + (b - a) * frac,
                (Some(a), None) => *a,
                _ => *input.last().expect("non-empty"),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use hound::{WavSpec, WavWriter};
    use std::io::Cursor;

    fn wav_bytes(spec: WavSpec, write: impl FnOnce(&mut WavWriter<&mut Cursor<Vec<u8>>>)) -> Vec<u8> {
        let mut cursor = Cursor::new(Vec::new());
        {
            let mut w = WavWriter::new(&mut cursor, spec).unwrap();
            write(&mut w);
            w.finalize().unwrap();
        }
        cursor.into_inner()
    }

    #[test]
    fn stereo_int16_is_downmixed() {
        let spec = WavSpec {
            channels: 2,
            sample_rate: 16_000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let bytes = wav_bytes(spec, |w| {
            for _ in 0..100 {
                w.write_sample(16384_i16).unwrap();
                w.write_sample(0_i16).unwrap();
            }
        });
        let buf = read_wav_from(Cursor::new(bytes)).unwrap();
        assert_eq!(buf.len(), 100);
        assert!(buf.samples().iter().all(|&s| (s - 0.25).abs() < 1e-6));
    }

    #[test]
    fn float_8k_is_upsampled() {
        let spec = WavSpec {
            channels: 1,
            sample_rate: 8_000,
            bits_per_sample: 32,
            sample_format: SampleFormat::Float,
        };
        let bytes = wav_bytes(spec, |w| {
            for i in 0..800 {
                w.write_sample(if i % 2 == 0 { 0.5_f32 } else { -0.5 }).unwrap();
            }
        });
        let buf = read_wav_from(Cursor::new(bytes)).unwrap();
        assert_eq!(buf.sample_rate(), 16_000);
        assert_eq!(buf.len(), 1600);
    }

    #[test]
    fn int24_scaling() {
        let spec = WavSpec {
            channels: 1,
            sample_rate: 16_000,
            bits_per_sample: 24,
            sample_format: SampleFormat::Int,
        };
        let bytes = wav_bytes(spec, |w| {
            w.write_sample(-(1_i32 << 23)).unwrap();
            w.write_sample(1_i32 << 22).unwrap();
        });
        let buf = read_wav_from(Cursor::new(bytes)).unwrap();
        assert_eq!(buf.samples(), &[-1.0, 0.5]);
    }

    #[test]
    fn empty_wav_is_rejected() {
        let spec = WavSpec {
            channels: 1,
            sample_rate: 16_000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let bytes = wav_bytes(spec, |_| {});
        assert!(matches!(read_wav_from(Cursor::new(bytes)), Err(AudioError::EmptyAudio)));
    }

    #[test]
    fn resample_identity_and_length() {
        let x = vec![0.0, 1.0, 2.0, 3.0];
        assert_eq!(resample_linear(&x, 16_000, 16_000), x);
        let up = resample_linear(&x, 8_000, 16_000);
        assert_eq!(up.len(), 8);
        assert_eq!(&up[..3], &[0.0, 0.5, 1.0]);
    }
}
