import io
import struct
import wave

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dcrfser.audio_io import (AudioClip, decode_wav, decode_wav_bytes, encode_wav_bytes,
                              preprocess, resample, resample_ratio, trim_silence, write_wav)
from dcrfser.errors import MalformedHeader, UnsupportedEncoding

from helpers import peak_frequency, tone


def stdlib_wav(samples_int16, sr=16000, channels=1):
    buf = io.BytesIO()
    with wave.open(buf, "wb") as w:
        w.setnchannels(channels)
        w.setsampwidth(2)
        w.setframerate(sr)
        w.writeframes(np.asarray(samples_int16, dtype="<i2").tobytes())
    return buf.getvalue()


def riff(fmt_body, data, extra_chunks=b""):
    fmt = b"fmt " + struct.pack("<I", len(fmt_body)) + fmt_body
    dat = b"data" + struct.pack("<I", len(data)) + data
    body = b"WAVE" + fmt + extra_chunks + dat
    return b"RIFF" + struct.pack("<I", len(body)) + body


def fmt_chunk(tag, channels, sr, bits):
    align = channels * ((bits + 7) // 8)
    return struct.pack("<HHIIHH", tag, channels, sr, sr * align, align, bits)


# -- AudioClip ---------------------------------------------------------------

def test_clip_rejects_out_of_range_and_nonfinite():
    with pytest.raises(ValueError):
        AudioClip(np.array([0.0, 1.5]), 16000)
    with pytest.raises(ValueError):
        AudioClip(np.array([0.0, np.nan]), 16000)
    with pytest.raises(ValueError):
        AudioClip(np.array([]), 16000)
    with pytest.raises(ValueError):
        AudioClip(np.zeros(4), 0)


def test_clip_buffer_is_read_only():
    clip = AudioClip(np.zeros(8), 8000)
    with pytest.raises(ValueError):
        clip.samples[0] = 1.0
    assert clip.duration == pytest.approx(1e-3)


# -- decoding ----------------------------------------------------------------

def test_decode_matches_stdlib_writer():
    ints = np.array([0, 1, -1, 32767, -32768, 12345], dtype=np.int16)
    clip = decode_wav_bytes(stdlib_wav(ints, 11025))
    assert clip.sample_rate == 11025
    np.testing.assert_array_equal(clip.samples, ints / 32768.0)


def test_stereo_is_averaged_to_mono():
    inter = np.array([1000, -1000, 2000, 0, -4000, 4000], dtype=np.int16)
    clip = decode_wav_bytes(stdlib_wav(inter, channels=2))
    np.testing.assert_allclose(clip.samples, [0.0, 1000 / 32768, 0.0])


def test_8bit_24bit_and_float_encodings():
    u8 = np.array([128, 255, 0], dtype=np.uint8)
    clip = decode_wav_bytes(riff(fmt_chunk(1, 1, 8000, 8), u8.tobytes()))
    np.testing.assert_allclose(clip.samples, [0.0, 127 / 128, -1.0])

    vals = [0, 1, -1, 2 ** 23 - 1, -2 ** 23]
    raw = b"".join(struct.pack("<i", v)[:3] for v in vals)
    clip = decode_wav_bytes(riff(fmt_chunk(1, 1, 8000, 24), raw))
    np.testing.assert_allclose(clip.samples, np.array(vals) / 2 ** 23)

    f = np.array([0.25, -0.5, 2.0], dtype="<f4")
    clip = decode_wav_bytes(riff(fmt_chunk(3, 1, 8000, 32), f.tobytes()))
    np.testing.assert_allclose(clip.samples, [0.25, -0.5, 1.0])


def test_extensible_format_and_unknown_chunks():
    ext = fmt_chunk(0xFFFE, 1, 8000, 16) + struct.pack("<HHI", 22, 16, 0) + \
        struct.pack("<H", 1) + b"\x00" * 14
    junk = b"LIST" + struct.pack("<I", 3) + b"abc" + b"\x00"  # odd size, padded
    data = np.array([100, -100], dtype="<i2").tobytes()
    clip = decode_wav_bytes(riff(ext, data, junk))
    np.testing.assert_allclose(clip.samples, [100 / 32768, -100 / 32768])


@pytest.mark.parametrize("blob", [
    b"", b"RIFF\x00\x00\x00\x00WAVX",
    riff(b"\x01\x00", b""),  # fmt too short
])
def test_malformed_headers(blob):
    with pytest.raises(MalformedHeader):
        decode_wav_bytes(blob)


def test_missing_data_chunk():
    fmt = fmt_chunk(1, 1, 8000, 16)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    with pytest.raises(MalformedHeader):
        decode_wav_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)


def test_compressed_codec_is_unsupported():
    with pytest.raises(UnsupportedEncoding):
        decode_wav_bytes(riff(fmt_chunk(2, 1, 8000, 4), b"\x00" * 8))


@given(st.lists(st.integers(-32768, 32767), min_size=1, max_size=200),
       st.sampled_from([8000, 16000, 22050, 44100]))
def test_encode_decode_round_trip(ints, sr):
    x = np.array(ints) / 32768.0
    clip = decode_wav_bytes(encode_wav_bytes(AudioClip(x, sr)))
    assert clip.sample_rate == sr
    # encoding scales by 32767, so values move by at most one LSB
    assert np.max(np.abs(clip.samples - x)) <= 1.5 / 32768


def test_write_and_read_file(tmp_path):
    clip = tone(300, 0.1, 16000)
    write_wav(tmp_path / "a.wav", clip)
    back = decode_wav(tmp_path / "a.wav")
    assert back.sample_rate == 16000
    np.testing.assert_allclose(back.samples, clip.samples, atol=1 / 32767)


# -- resampling --------------------------------------------------------------

@pytest.mark.parametrize("src,dst", [(16000, 22050), (44100, 22050), (48000, 22050)])
def test_resampled_sine_matches_analytic_sine(src, dst):
    f = 440.0
    clip = tone(f, 0.5, src, amp=0.5, phase=0.3)
    out = resample(clip, dst)
    assert out.sample_rate == dst
    assert out.samples.size == round(clip.samples.size * dst / src)
    t = np.arange(out.samples.size) / dst
    expected = 0.5 * np.sin(2 * np.pi * f * t + 0.3)
    interior = slice(200, -200)
    np.testing.assert_allclose(out.samples[interior], expected[interior], atol=2e-3)


def test_resample_same_rate_is_identity():
    clip = tone(100, 0.05, 22050)
    assert resample(clip, 22050) is clip


def test_downsampling_removes_content_above_new_nyquist():
    # 15 kHz at 44.1 kHz cannot survive a move to 22.05 kHz
    clip = tone(15000, 0.3, 44100, amp=0.8)
    out = resample(clip, 22050)
    assert np.sqrt(np.mean(out.samples[500:-500] ** 2)) < 1e-3


def test_resample_ratio_with_explicit_length():
    x = np.sin(2 * np.pi * 5 * np.arange(1000) / 1000)
    y = resample_ratio(x, 0.5, out_len=600)
    assert y.size == 600
    # the kernel reaches 64 zero crossings = 128 input = 64 output samples past the end
    assert np.all(y[500 + 64 + 1:] == 0.0)
    assert np.max(np.abs(y[510:])) < 1e-4


# -- trimming ----------------------------------------------------------------

def padded_tone(lead_s, voiced_s, trail_s, sr=22050):
    voiced = tone(440, voiced_s, sr).samples
    lead, trail = (np.zeros(int(round(s * sr))) for s in (lead_s, trail_s))
    return AudioClip(np.concatenate([lead, voiced, trail]), sr)


def test_long_silences_keep_thirty_percent():
    sr = 22050
    clip = padded_tone(1.0, 0.5, 1.0)
    out = trim_silence(clip)
    removed = clip.samples.size - out.samples.size
    # 70% of each 1 s run goes, up to frame-level boundary slack
    assert removed == pytest.approx(0.7 * 2 * sr, abs=0.06 * sr * 2)
    # every voiced sample survives
    assert np.count_nonzero(out.samples) == np.count_nonzero(clip.samples)


def test_short_silences_are_untouched():
    clip = padded_tone(0.1, 0.5, 0.1)
    assert trim_silence(clip) is clip


def test_all_silent_clip_is_cut_to_thirty_percent():
    clip = AudioClip(np.zeros(1000), 8000)
    assert trim_silence(clip).samples.size == 300


def test_preprocess_trims_then_resamples():
    clip = padded_tone(1.0, 0.5, 1.0, sr=16000)
    out = preprocess(clip, 22050)
    assert out.sample_rate == 22050
    assert out.duration < clip.duration - 1.2
    assert peak_frequency(out.samples, 22050) == pytest.approx(440, rel=2e-3)
