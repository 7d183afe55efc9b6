"""Writes the golden WAV fixtures with Python's wave module.

Run from this directory: python3 golden_wav.py
"""
import math
import struct
import wave
from fractions import Fraction

PARTIALS = [1.0, 0.5, 0.25, 0.125]
ATTACK, DECAY, SUSTAIN, RELEASE = 0.01, 0.05, 0.8, 0.05
MASTER, MELODY_GAIN, HARMONY_GAIN, TEMPO = 0.25, 1.0, 0.7, 120


def to_f32(x):
    return struct.unpack("<f", struct.pack("<f", x))[0]


def quantize(s):
    v = max(-1.0, min(1.0, s)) * 32767.0
    return int(math.copysign(math.floor(abs(v) + 0.5), v))


def write(path, rate, samples):
    with wave.open(path, "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(rate)
        w.writeframes(b"".join(struct.pack("<h", quantize(s)) for s in samples))


def envelope(t, length):
    gate = max(length - RELEASE, 0.0)

    def held(t):
        if t < ATTACK:
            return t / ATTACK
        if t < ATTACK + DECAY:
            return 1.0 - (1.0 - SUSTAIN) * (t - ATTACK) / DECAY
        return SUSTAIN

    if t < gate:
        return held(t)
    return held(gate) * max(1.0 - (t - gate) / RELEASE, 0.0)


def sample_at(beats, rate):
    return math.floor(beats * 60 * rate / TEMPO)


def render(notes, total_beats, rate):
    n = math.ceil(total_beats * 60 * rate / TEMPO)
    out = [0.0] * n
    for pitch, onset, dur, gain in notes:
        if pitch == 128:
            continue
        start, end = sample_at(onset, rate), sample_at(onset + dur, rate)
        freq = 440.0 * 2.0 ** ((pitch - 69.0) / 12.0)
        length = (end - start) / rate
        for i in range(end - start):
            t = i / rate
            v = 0.0
            for k, amp in enumerate(PARTIALS):
                f = freq * (k + 1)
                if f >= rate / 2.0:
                    break
                v += amp * math.sin(2.0 * math.pi * f * t)
            out[start + i] += gain * MASTER * envelope(t, length) * v
    peak = max(abs(v) for v in out)
    scale = 0.9 / peak if peak > 1.0 else 1.0
    return [to_f32(max(-1.0, min(1.0, v * scale))) for v in out]


if __name__ == "__main__":
    write("pcm_values.wav", 44100, [to_f32(v) for v in [0.0, 1.0, -1.0, 0.5, -0.5, 0.25, -0.75, 1e-5, -1e-5, 0.999]])
    q = Fraction(1)
    melody = [(69, Fraction(0), q, MELODY_GAIN), (128, q, q / 2, MELODY_GAIN), (76, 3 * q / 2, q / 2, MELODY_GAIN)]
    harmony = [(73, Fraction(0), q, HARMONY_GAIN), (128, q, q / 2, HARMONY_GAIN), (81, 3 * q / 2, q / 4, HARMONY_GAIN)]
    write("short_score.wav", 22050, render(melody + harmony, Fraction(2), 22050))
