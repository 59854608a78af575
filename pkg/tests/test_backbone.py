import pytest
import torch

from lptm_kit import Backbone, BackboneConfig, Segment, SegmentSet, TokenSequence


def small_config(**kw):
    base = dict(num_layers=2, num_heads=2, model_dim=16, feedforward_dim=32)
    base.update(kw)
    return BackboneConfig(**base)


def _zero_residual_branches(backbone):
    """Zero every attention output and FFN output projection.

    With all residual branches silenced the encoder reduces to layer
    norms only, which gives a closed-form expected output.
    """
    with torch.no_grad():
        for layer in backbone.layers:
            layer.self_attn.out_proj.weight.zero_()
            layer.self_attn.out_proj.bias.zero_()
            layer.linear2.weight.zero_()
            layer.linear2.bias.zero_()


def _layer_norm(x, eps=1e-5):
    mean = x.mean(dim=-1, keepdim=True)
    var = x.var(dim=-1, keepdim=True, unbiased=False)
    return (x - mean) / torch.sqrt(var + eps)


def test_prenorm_with_silenced_branches_is_final_layernorm():
    torch.manual_seed(0)
    bb = Backbone(small_config(norm="pre"))
    _zero_residual_branches(bb)
    x = torch.randn(5, 16)
    out = bb(x)
    assert torch.allclose(out, _layer_norm(x), atol=1e-5)


def test_postnorm_with_silenced_branches_is_iterated_layernorm():
    torch.manual_seed(1)
    bb = Backbone(small_config(norm="post"))
    _zero_residual_branches(bb)
    x = torch.randn(5, 16)
    expected = x
    for _ in range(2 * 2):  # two norms per layer, two layers
        expected = _layer_norm(expected)
    assert torch.allclose(bb(x), expected, atol=1e-5)


def test_output_shape_and_token_sequence_input():
    torch.manual_seed(2)
    bb = Backbone(small_config())
    segset = SegmentSet((Segment(1, 3), Segment(3, 4)), 4)
    seq = TokenSequence(tokens=torch.randn(2, 16), segment_set=segset, mask_flags=(False, True))
    out = bb(seq)
    assert out.shape == (2, 16)
    assert torch.equal(bb(seq.tokens), out)


def test_single_token_works():
    bb = Backbone(small_config())
    assert bb(torch.randn(1, 16)).shape == (1, 16)


def test_attention_is_bidirectional():
    # changing a later token must change an earlier token's output
    # (single-component bump: layer norm erases uniform shifts)
    torch.manual_seed(3)
    bb = Backbone(small_config())
    x = torch.randn(4, 16)
    base = bb(x)
    x2 = x.clone()
    x2[3, 0] += 1.0
    moved = bb(x2)
    assert not torch.allclose(base[0], moved[0])


def test_deterministic_forward():
    torch.manual_seed(4)
    bb = Backbone(small_config())
    x = torch.randn(6, 16)
    assert torch.equal(bb(x), bb(x))


def test_gradients_reach_all_parameters():
    torch.manual_seed(5)
    bb = Backbone(small_config())
    out = bb(torch.randn(3, 16))
    out.pow(2).sum().backward()
    for name, param in bb.named_parameters():
        assert param.grad is not None, name


def test_input_validation():
    bb = Backbone(small_config())
    with pytest.raises(ValueError):
        bb(torch.randn(0, 16))
    with pytest.raises(ValueError):
        bb(torch.randn(3, 8))


def test_config_validation():
    with pytest.raises(ValueError):
        BackboneConfig(model_dim=10, num_heads=4)
    with pytest.raises(ValueError):
        BackboneConfig(norm="middle")
    with pytest.raises(ValueError):
        BackboneConfig(dropout=1.5)
    with pytest.raises(ValueError):
        BackboneConfig(num_layers=0)
