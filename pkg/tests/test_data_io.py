import struct

import numpy as np
import pytest

from gammarbm import data_io, dsp, models
from gammarbm.mathcore import Rng
from gammarbm.training import EpochMetrics as EM
from gammarbm.training import NormalizationStats, TrainConfig


class TestWav:
    def test_pcm16_scaling(self, tmp_path):
        path = tmp_path / "a.wav"
        payload = struct.pack("<h", 16384)
        header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
        header += b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, 16000, 32000, 2, 16)
        header += b"data" + struct.pack("<I", len(payload))
        path.write_bytes(header + payload)
        clip = data_io.read_wav(path)
        assert clip.samples[0] == pytest.approx(0.5)
        assert clip.sample_rate == 16000

    def test_write_read_round_trip(self, tmp_path):
        rng = Rng(1)
        x = rng.gen.uniform(-0.9, 0.9, 4000)
        path = tmp_path / "rt.wav"
        data_io.write_wav(path, x, 16000)
        clip = data_io.read_wav(path)
        assert clip.samples.shape == x.shape
        assert np.max(np.abs(clip.samples - x)) <= 2.0 ** -15

    def test_stereo_first_channel(self, tmp_path):
        left = np.array([0.25, -0.5, 0.75], dtype="<f4")
        right = np.array([0.0, 0.0, 0.0], dtype="<f4")
        inter = np.empty(6, dtype="<f4")
        inter[0::2], inter[1::2] = left, right
        payload = inter.tobytes()
        header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
        header += b"fmt " + struct.pack("<IHHIIHH", 16, 3, 2, 16000, 128000, 8, 32)
        header += b"data" + struct.pack("<I", len(payload))
        path = tmp_path / "st.wav"
        path.write_bytes(header + payload)
        clip = data_io.read_wav(path)
        assert np.allclose(clip.samples, left.astype(float))

    def test_truncated_file(self, tmp_path):
        path = tmp_path / "t.wav"
        data_io.write_wav(path, np.zeros(100), 16000)
        raw = path.read_bytes()
        path.write_bytes(raw[: len(raw) // 2])
        with pytest.raises(data_io.MalformedHeaderError):
            data_io.read_wav(path)

    def test_not_riff(self, tmp_path):
        path = tmp_path / "n.wav"
        path.write_bytes(b"NOTAWAVEFILE")
        with pytest.raises(data_io.MalformedHeaderError):
            data_io.read_wav(path)

    def test_unsupported_encoding(self, tmp_path):
        payload = b"\x00" * 8
        header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
        header += b"fmt " + struct.pack("<IHHIIHH", 16, 6, 1, 8000, 8000, 1, 8)
        header += b"data" + struct.pack("<I", len(payload))
        path = tmp_path / "u.wav"
        path.write_bytes(header + payload)
        with pytest.raises(data_io.UnsupportedEncodingError):
            data_io.read_wav(path)

    def test_empty_audio(self, tmp_path):
        header = b"RIFF" + struct.pack("<I", 36) + b"WAVE"
        header += b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, 16000, 32000, 2, 16)
        header += b"data" + struct.pack("<I", 0)
        path = tmp_path / "e.wav"
        path.write_bytes(header)
        with pytest.raises(data_io.EmptyAudioError):
            data_io.read_wav(path)


class TestSynthSpeechlike:
    def test_deterministic(self):
        a = data_io.synth_speechlike(Rng(5), 0.5)
        b = data_io.synth_speechlike(Rng(5), 0.5)
        assert np.array_equal(a.samples, b.samples)

    def test_spectral_peak_near_harmonics(self):
        clip = data_io.synth_speechlike(Rng(6), 1.0)
        spec = dsp.stft(clip.samples, 256, 64, clip.sample_rate)
        spec = dsp.discard_silence(spec, -30.0)
        # strongest bin of the loudest frame sits in the voiced band
        frame = spec.frames[np.argmax(dsp.frame_energies(spec))]
        peak_hz = np.argmax(frame) * clip.sample_rate / 256
        assert 80.0 <= peak_hz <= 4000.0

    def test_silence_detectable(self):
        clip = data_io.synth_speechlike(Rng(7), 2.0)
        spec = dsp.stft(clip.samples, 256, 64, clip.sample_rate)
        kept = dsp.discard_silence(spec, -60.0)
        assert kept.n_frames < spec.n_frames

    def test_range_and_rate(self):
        clip = data_io.synth_speechlike(Rng(8), 0.25, sample_rate=8000)
        assert clip.sample_rate == 8000
        assert clip.samples.size == 2000
        assert np.max(np.abs(clip.samples)) <= 0.9 + 1e-12


def random_checkpoint(rng, kind):
    i, j = 4, 3
    if kind == "gamma":
        params = models.GammaRbmParams(
            W_tilde=rng.gen.normal(0, 1, (i, j)), V_tilde=rng.gen.normal(0, 1, (i, j)),
            c=rng.gen.normal(0, 1, j), d=rng.gen.normal(0, 1, j),
            epsilon=float(rng.gen.uniform(1e-5, 0.1)))
    elif kind == "gauss":
        params = models.GaussRbmParams(
            W=rng.gen.normal(0, 1, (i, j)), b=rng.gen.normal(0, 1, i),
            c=rng.gen.normal(0, 1, j), log_var=rng.gen.normal(0, 1, i))
    else:
        params = models.BernRbmParams(
            W=rng.gen.normal(0, 1, (i, j)), b=rng.gen.normal(0, 1, i),
            c=rng.gen.normal(0, 1, j))
    stats = NormalizationStats(
        kind="gamma-scale", per_dim_mean=rng.gen.uniform(0.5, 2.0, i))
    return data_io.Checkpoint(model_kind=kind, params=params, norm_stats=stats,
                              train_config=TrainConfig(epochs=3, seed=11))


class TestCheckpoint:
    @pytest.mark.parametrize("kind", ["gamma", "gauss", "bern"])
    def test_round_trip_bit_exact(self, tmp_path, kind):
        rng = Rng(10)
        for trial in range(50):
            ckpt = random_checkpoint(rng, kind)
            path = tmp_path / f"{kind}{trial}.ckpt"
            data_io.save_checkpoint(path, ckpt)
            loaded = data_io.load_checkpoint(path)
            assert loaded.model_kind == kind
            for name, arr in ckpt.params.arrays().items():
                assert np.array_equal(loaded.params.arrays()[name], arr)
            assert np.array_equal(loaded.norm_stats.per_dim_mean,
                                  ckpt.norm_stats.per_dim_mean)
            assert loaded.train_config == ckpt.train_config
            if kind == "gamma":
                assert loaded.params.epsilon == ckpt.params.epsilon

    def test_save_is_deterministic(self, tmp_path):
        ckpt = random_checkpoint(Rng(11), "gamma")
        p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        data_io.save_checkpoint(p1, ckpt)
        data_io.save_checkpoint(p2, ckpt)
        assert p1.read_bytes() == p2.read_bytes()

    def test_wrong_magic(self, tmp_path):
        path = tmp_path / "m.ckpt"
        data_io.save_checkpoint(path, random_checkpoint(Rng(12), "gauss"))
        raw = bytearray(path.read_bytes())
        raw[:8] = b"BADMAGIC"
        path.write_bytes(bytes(raw))
        with pytest.raises(data_io.CorruptPayloadError):
            data_io.load_checkpoint(path)

    def test_corrupted_payload(self, tmp_path):
        path = tmp_path / "c.ckpt"
        data_io.save_checkpoint(path, random_checkpoint(Rng(13), "bern"))
        raw = bytearray(path.read_bytes())
        raw[len(raw) // 2] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(data_io.CorruptPayloadError):
            data_io.load_checkpoint(path)

    def test_version_mismatch(self, tmp_path):
        import hashlib
        path = tmp_path / "v.ckpt"
        data_io.save_checkpoint(path, random_checkpoint(Rng(14), "gamma"))
        raw = bytearray(path.read_bytes()[:-8])
        struct.pack_into("<I", raw, 8, 99)  # bump version, re-sign checksum
        raw = bytes(raw)
        path.write_bytes(raw + hashlib.blake2b(raw, digest_size=8).digest())
        with pytest.raises(data_io.VersionMismatchError):
            data_io.load_checkpoint(path)


class TestSpectrogramCache:
    def test_round_trip(self, tmp_path):
        rng = Rng(15)
        x = rng.gen.normal(0, 0.3, 4000)
        spec = dsp.stft(x, 256, 64, 16000)
        path = tmp_path / "s.cache"
        data_io.save_spectrogram_cache(path, spec)
        loaded = data_io.load_spectrogram_cache(path)
        assert np.array_equal(loaded.frames, spec.frames)
        assert np.array_equal(loaded.phase, spec.phase)
        assert (loaded.sample_rate, loaded.win_len, loaded.hop) == (16000, 256, 64)

    def test_kind_tag_checked(self, tmp_path):
        path = tmp_path / "x.ckpt"
        data_io.save_checkpoint(path, random_checkpoint(Rng(16), "gamma"))
        with pytest.raises(data_io.CorruptPayloadError):
            data_io.load_spectrogram_cache(path)


class TestMetricsExport:
    def _log(self):
        return [EM(epoch=0, mse_amp=1.5, mse_log=0.25, exact_ll=-3.125),
                EM(epoch=1, mse_amp=1.25, mse_log=0.125, exact_ll=None)]

    def test_line_count(self, tmp_path):
        path = tmp_path / "m.csv"
        data_io.export_metrics(self._log(), path)
        lines = path.read_text().splitlines()
        assert len(lines) == 3
        assert lines[0] == "epoch,mse_amp,mse_log,exact_ll"

    def test_round_trip(self, tmp_path):
        path = tmp_path / "m.csv"
        data_io.export_metrics(self._log(), path, config={"model": "gamma"})
        config, rows = data_io.read_metrics(path)
        assert config == {"model": "gamma"}
        assert rows[0] == (0, 1.5, 0.25, -3.125)
        assert rows[1] == (1, 1.25, 0.125, None)

    def test_empty_log_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            data_io.export_metrics([], tmp_path / "m.csv")
