import numpy as np
import pytest

from gammarbm import dsp
from gammarbm.mathcore import Rng


class TestStft:
    def test_bin_count(self):
        spec = dsp.stft(np.zeros(16000), win_len=256, hop=64)
        assert spec.n_bins == 129

    def test_dc_signal_concentrates_in_bin_zero(self):
        spec = dsp.stft(np.ones(1024), win_len=256, hop=64)
        w_sum = dsp.hamming(256).sum()
        assert np.allclose(spec.frames[:, 0], w_sum, rtol=1e-12)
        # bin 1 carries the Hamming cosine component (~0.23 L); beyond the
        # window mainlobe everything is tiny
        assert np.all(spec.frames[:, 2:] < 2e-3 * w_sum)

    def test_zero_signal(self):
        spec = dsp.stft(np.zeros(2048), win_len=256, hop=64)
        assert np.all(spec.frames == 0.0)

    def test_too_short(self):
        with pytest.raises(dsp.SignalTooShortError):
            dsp.stft(np.zeros(100), win_len=256, hop=64)

    def test_frame_count(self):
        spec = dsp.stft(np.zeros(16000), win_len=256, hop=64)
        assert spec.n_frames == 1 + (16000 - 256) // 64

    def test_parseval_per_frame(self):
        # unnormalized forward DFT: sum |X|^2 over the full spectrum equals
        # L * sum |x_windowed|^2; one-sided bins double except DC/Nyquist
        rng = Rng(1)
        x = rng.gen.normal(0, 1, 256)
        w = dsp.hamming(256)
        spec = dsp.stft(x, win_len=256, hop=64)
        a = spec.frames[0]
        spectral = a[0] ** 2 + a[-1] ** 2 + 2.0 * np.sum(a[1:-1] ** 2)
        time_dom = 256.0 * np.sum((x * w) ** 2)
        assert spectral == pytest.approx(time_dom, rel=1e-9)


class TestIstft:
    @pytest.mark.parametrize("trial", range(5))
    def test_round_trip_random(self, trial):
        rng = Rng(100 + trial)
        x = rng.gen.normal(0, 1, 8000)
        spec = dsp.stft(x, win_len=256, hop=64)
        y = dsp.istft(spec)
        n = min(x.size, y.size)
        interior = slice(256, n - 256)
        err = np.sqrt(np.mean((x[interior] - y[interior]) ** 2))
        ref = np.sqrt(np.mean(x[interior] ** 2))
        assert err / ref <= 1e-6

    def test_round_trip_sinusoid(self):
        t = np.arange(8000) / 16000
        x = np.sin(2 * np.pi * 440 * t)
        y = dsp.istft(dsp.stft(x, 256, 64))
        interior = slice(256, 8000 - 256)
        assert np.allclose(x[interior], y[interior], atol=1e-8)

    def test_zero_spectrogram(self):
        spec = dsp.stft(np.zeros(2048), 256, 64)
        assert np.all(dsp.istft(spec) == 0.0)

    def test_replaced_amplitude_stays_finite(self):
        rng = Rng(2)
        x = rng.gen.normal(0, 0.3, 4000)
        spec = dsp.stft(x, 256, 64)
        modified = dsp.Spectrogram(
            frames=np.abs(rng.gen.normal(0, 1, spec.frames.shape)),
            phase=spec.phase, sample_rate=spec.sample_rate,
            win_len=256, hop=64)
        y = dsp.istft(modified)
        assert y.size == 256 + (spec.n_frames - 1) * 64
        assert np.all(np.isfinite(y))

    def test_inconsistent_metadata(self):
        spec = dsp.stft(np.zeros(2048), 256, 64)
        spec.hop = 0
        with pytest.raises(ValueError):
            dsp.istft(spec)


class TestDiscardSilence:
    def _tone_plus_silence(self):
        t = np.arange(16000) / 16000
        tone = 0.5 * np.sin(2 * np.pi * 300 * t)
        return dsp.stft(np.concatenate([tone, np.zeros(16000)]), 256, 64)

    def test_neg_inf_threshold_is_identity(self):
        spec = self._tone_plus_silence()
        out = dsp.discard_silence(spec, -np.inf)
        assert out.n_frames == spec.n_frames

    def test_zero_db_keeps_only_peak(self):
        spec = self._tone_plus_silence()
        out = dsp.discard_silence(spec, 0.0)
        energies = dsp.frame_energies(spec)
        assert out.n_frames == int(np.sum(energies >= energies.max()))

    def test_tone_silence_split(self):
        spec = self._tone_plus_silence()
        out = dsp.discard_silence(spec, -40.0)
        tone_frames = (16000 - 256) // 64 + 1
        # all retained frames carry tone energy; count close to the tone span
        assert out.n_frames <= tone_frames + 4
        assert out.n_frames >= tone_frames - 4

    def test_idempotent(self):
        spec = self._tone_plus_silence()
        once = dsp.discard_silence(spec, -40.0)
        twice = dsp.discard_silence(once, -40.0)
        assert np.array_equal(once.frames, twice.frames)

    def test_all_removed_error(self):
        spec = self._tone_plus_silence()
        with pytest.raises(dsp.AllFramesRemovedError):
            dsp.discard_silence(spec, 10.0)

    def test_order_preserved(self):
        spec = self._tone_plus_silence()
        out = dsp.discard_silence(spec, -40.0)
        energies = dsp.frame_energies(spec)
        keep = energies >= energies.max() * 10 ** (-4.0)
        assert np.array_equal(out.frames, spec.frames[keep])


class TestFloorAmplitude:
    def test_strict_positivity(self):
        frames = np.array([[0.0, 1.0], [0.5, 2.0]])
        floored = dsp.floor_amplitude(frames)
        assert np.all(floored > 0)
        assert floored[0, 0] == pytest.approx(1e-5 * 2.0)

    def test_untouched_above_floor(self):
        frames = np.array([[0.5, 2.0]])
        assert np.array_equal(dsp.floor_amplitude(frames), frames)

    def test_all_zero_rejected(self):
        with pytest.raises(ValueError):
            dsp.floor_amplitude(np.zeros((3, 4)))
