use std::io::Cursor;
use std::path::Path;

use super::synth::Waveform;
use super::ConductorError;

/// Full-scale float to 16-bit PCM, rounding half away from zero.
pub fn quantize(sample: f32) -> i16 {
    (sample.clamp(-1.0, 1.0) as f64 * 32767.0).round() as i16
}

fn spec(rate: u32) -> hound::WavSpec {
    hound::WavSpec {
        channels: 1,
        sample_rate: rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    }
}

/// RIFF/WAVE PCM16 mono file contents.
pub fn wav_bytes(w: &Waveform) -> Result<Vec<u8>, ConductorError> {
    let mut cursor = Cursor::new(Vec::with_capacity(44 + 2 * w.samples.len()));
    {
        let mut writer = hound::WavWriter::new(&mut cursor, spec(w.rate))?;
        let mut samples = writer.get_i16_writer(w.samples.len() as u32);
        for &s in &w.samples {
            samples.write_sample(quantize(s));
        }
        samples.flush()?;
        writer.finalize()?;
    }
    Ok(cursor.into_inner())
}

pub fn write_wav(w: &Waveform, path: &Path) -> Result<(), ConductorError> {
    let bytes = wav_bytes(w)?;
    std::fs::write(path, bytes).map_err(|source| ConductorError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Sample rate and PCM samples of a mono 16-bit file.
pub fn read_wav(path: &Path) -> Result<(u32, Vec<i16>), ConductorError> {
    let mut reader = hound::WavReader::open(path)?;
    let s = reader.spec();
    if s.channels != 1 || s.bits_per_sample != 16 || s.sample_format != hound::SampleFormat::Int {
        return Err(ConductorError::UnsupportedWav(format!(
            "{} channels, {} bits",
            s.channels, s.bits_per_sample
        )));
    }
    let samples = reader.samples::<i16>().collect::<Result<Vec<_>, _>>()?;
    Ok((s.sample_rate, samples))
}
