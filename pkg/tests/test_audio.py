import math

import pytest
import torch

from motionflow.audio import (
    AudioTrack,
    CausalAudioEncoder,
    append_padding_token,
    downsampled_length,
    extract_frame_features,
)
from motionflow.codec import CodecConfig


def sine_track(freq=440.0, sr=8000.0, seconds=1.32, amp=0.5):
    k = torch.arange(int(sr * seconds))
    return AudioTrack(amp * torch.sin(2 * math.pi * freq * k / sr), sr)


def test_silence_gives_zero_features():
    track = AudioTrack(torch.zeros(8000), 8000.0)
    feats = extract_frame_features(track, fps=25.0, t_frames=25)
    assert torch.count_nonzero(feats) == 0


def test_empty_waveform_rejected():
    with pytest.raises(ValueError):
        AudioTrack(torch.zeros(0), 8000.0)


def test_sine_envelope_constant_interior():
    track = sine_track()
    feats = extract_frame_features(track, fps=25.0, t_frames=33)
    env = feats[1:-1, 0]
    # mean |sin| over a long window approaches 2/pi times amplitude
    ref = 0.5 * 2 / math.pi
    assert ((env - ref).abs() / ref).max().item() < 0.05


def test_mean_abs_is_linear_in_amplitude():
    a = extract_frame_features(sine_track(amp=0.3), 25.0, 33)
    b = extract_frame_features(sine_track(amp=0.6), 25.0, 33)
    assert torch.allclose(b[:, 0], 2 * a[:, 0], atol=1e-7)
    assert torch.equal(a[:, 3], b[:, 3])  # sign-change rate is amplitude-invariant


def test_envelope_delta_column():
    track = sine_track()
    feats = extract_frame_features(track, 25.0, 33)
    env = feats[:, 0]
    assert torch.allclose(feats[1:, 1], env[1:] - env[:-1], atol=1e-6)
    assert feats[0, 1] == env[0]  # previous envelope starts at zero


def test_frame_count():
    assert sine_track(seconds=1.32).frame_count(25.0) == 33


@pytest.mark.parametrize("t,expect", [(121, 16), (1, 1), (9, 2), (10, 2), (17, 3)])
def test_downsampled_length(t, expect):
    # oracle: repeated ceil halving
    n = t
    for _ in range(3):
        n = math.ceil(n / 2)
    assert n == expect
    assert downsampled_length(t) == expect
    enc = CausalAudioEncoder(c_hidden=8, width=16, n_local=2)
    hidden = enc.downsample(torch.randn(t, 4))
    assert hidden.shape == (expect, 8)


@pytest.mark.parametrize("t", [1, 9, 17, 33, 121])
def test_length_alignment_with_codec(t):
    cfg = CodecConfig(r_t=8, p_h=8, p_w=8)
    assert downsampled_length(t) == cfg.latent_frames(t)


def test_causality_bitwise():
    torch.manual_seed(0)
    enc = CausalAudioEncoder(c_hidden=16, width=8, n_local=2)
    feats = torch.randn(50, 4)
    base = enc.downsample(feats)
    for i in [1, 8, 9, 24, 41]:
        bumped = feats.clone()
        bumped[i] += 3.0
        out = enc.downsample(bumped)
        unaffected = [j for j in range(base.shape[0]) if 8 * j < i]
        for j in unaffected:
            assert torch.equal(out[j], base[j]), f"step {j} changed by frame {i}"
        # the step whose window covers i must actually change
        assert not torch.equal(out, base)


def test_determinism():
    torch.manual_seed(1)
    enc = CausalAudioEncoder()
    feats = torch.randn(33, 4)
    a = enc(feats)
    b = enc(feats)
    assert torch.equal(a.a_glo, b.a_glo) and torch.equal(a.a_loc, b.a_loc)


def test_head_shapes():
    torch.manual_seed(2)
    enc = CausalAudioEncoder(c_hidden=32, width=64, n_local=4, c_audio=8)
    out = enc(torch.randn(121, 4))
    assert out.a_glo.shape == (16, 64)
    assert out.a_loc.shape == (16, 4, 8)


def test_zero_hidden_zero_bias_heads():
    enc = CausalAudioEncoder(c_hidden=8, width=16, n_local=3, c_audio=4)
    for head in enc.local_heads:
        torch.nn.init.zeros_(head.bias)
    out = enc.heads(torch.zeros(5, 8))
    assert torch.count_nonzero(out.a_glo) == 0  # global head is zero-initialized
    assert torch.count_nonzero(out.a_loc) == 0


def test_heads_distinct_rows():
    enc = CausalAudioEncoder(c_hidden=8, width=8, n_local=1)
    with torch.no_grad():
        enc.global_head.weight.copy_(torch.eye(8))
        enc.global_head.bias.zero_()
    hidden = torch.stack([torch.full((8,), float(i)) for i in range(4)])
    out = enc.heads(hidden)
    assert len({tuple(r.tolist()) for r in out.a_glo}) == 4


def test_append_padding_token():
    a_loc = torch.zeros(6, 4, 8)
    p = torch.arange(8.0).reshape(1, 8)
    out = append_padding_token(a_loc, p)
    assert out.shape == (6, 5, 8)
    for j in range(6):
        assert torch.equal(out[j, 4], p[0])
        assert torch.count_nonzero(out[j, :4]) == 0


def test_padding_token_gradient_isolated():
    torch.manual_seed(3)
    a_loc = torch.randn(5, 3, 4, requires_grad=True)
    p = torch.randn(1, 4, requires_grad=True)
    out = append_padding_token(a_loc, p)
    loss = out[:, 3].pow(2).sum()  # depends only on the padding row
    loss.backward()
    assert torch.count_nonzero(a_loc.grad) == 0
    # finite-difference oracle on one coordinate of p
    eps = 1e-3
    with torch.no_grad():
        p_hi, p_lo = p.clone(), p.clone()
        p_hi[0, 1] += eps
        p_lo[0, 1] -= eps
        f_hi = append_padding_token(a_loc, p_hi)[:, 3].pow(2).sum()
        f_lo = append_padding_token(a_loc, p_lo)[:, 3].pow(2).sum()
    fd = (f_hi - f_lo) / (2 * eps)
    assert abs(fd - p.grad[0, 1]) < 1e-2


def test_padding_row_independent_of_audio():
    torch.manual_seed(4)
    enc = CausalAudioEncoder(c_hidden=8, width=8, n_local=2, c_audio=4)
    with torch.no_grad():
        enc.padding_token.copy_(torch.randn(1, 4))
    out_a = append_padding_token(enc(torch.randn(33, 4)).a_loc, enc.padding_token)
    out_b = append_padding_token(enc(torch.randn(33, 4)).a_loc, enc.padding_token)
    assert torch.equal(out_a[:, -1], out_b[:, -1])
    assert (out_a[:, -1] == out_a[0, -1]).all()
