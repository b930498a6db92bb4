"""
Tests for the tokenizer, the weight files and the prompted forward pass.
"""

import math

import numpy as np
import pytest

from src.encoder.model import (
    PromptSet,
    encode,
    encode_batch,
    encode_prompted,
    encode_prompted_batch,
    init_prompts,
    nearest_vocab_words,
    trace_block_inputs,
)
from src.encoder.vocabulary import (
    EOS_TOKEN,
    PAD_TOKEN,
    SOS_TOKEN,
    UNK_TOKEN,
    TokenSequence,
    Vocabulary,
    tokenize,
)
from src.encoder.weights import (
    EncoderConfig,
    init_weights,
    load_weights,
    save_weights,
)
from src.numerics.arrays import finite_difference_gradient
from src.numerics.tensor import Tensor, backward
from src.structures.errors import CapacityOverflowError, ValidationError
from src.training.losses import mapping_loss

TOY_INPUTS = ["a photo of a cat", "a photo of a dog", "a photo of a bird"]


def layer_norm(x, w, b, eps=1e-5):
    mean = x.mean(axis=-1, keepdims=True)
    var = ((x - mean) ** 2).mean(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + eps) * w + b


def gelu(x):
    inner = math.sqrt(2 / math.pi) * (x + 0.044715 * x**3)
    return 0.5 * x * (1 + np.tanh(inner))


def reference_forward(ids, eos, weights, prompts=()):
    """Encodes one id sequence with loops over heads, written from scratch."""
    config = weights.config
    a = weights.array
    length = config.context_length
    count = len(prompts[0]) if prompts else 0
    x = a("token_embedding")[list(ids)]
    if count:
        x = np.vstack([x[:1], prompts[0], x[1 : length - count]])
    x = x + a("positional_embedding")
    heads, size = config.num_heads, config.head_dim
    for layer in range(config.num_layers):
        if count and 0 < layer < len(prompts):
            x = x.copy()
            x[1 : 1 + count] = prompts[layer]
        p = f"blocks.{layer}."
        h = layer_norm(x, a(p + "ln_1.weight"), a(p + "ln_1.bias"))
        q = h @ a(p + "attn.q_proj.weight") + a(p + "attn.q_proj.bias")
        k = h @ a(p + "attn.k_proj.weight") + a(p + "attn.k_proj.bias")
        v = h @ a(p + "attn.v_proj.weight") + a(p + "attn.v_proj.bias")
        out = np.zeros_like(x)
        for head in range(heads):
            cols = slice(head * size, (head + 1) * size)
            for i in range(length):
                scores = q[i, cols] @ k[: i + 1, cols].T / math.sqrt(size)
                weights_i = np.exp(scores - scores.max())
                weights_i /= weights_i.sum()
                out[i, cols] = weights_i @ v[: i + 1, cols]
        out = out @ a(p + "attn.out_proj.weight")
        x = x + out + a(p + "attn.out_proj.bias")
        h = layer_norm(x, a(p + "ln_2.weight"), a(p + "ln_2.bias"))
        h = gelu(h @ a(p + "mlp.c_fc.weight") + a(p + "mlp.c_fc.bias"))
        x = x + h @ a(p + "mlp.c_proj.weight") + a(p + "mlp.c_proj.bias")
    x = layer_norm(x, a("ln_final.weight"), a("ln_final.bias"))
    feature = x[eos + count] @ a("text_projection")
    return feature / np.linalg.norm(feature)


def random_sequence(rng, vocab_size, length, eos):
    ids = rng.integers(0, vocab_size, size=length)
    return TokenSequence(tuple(int(i) for i in ids), eos, "random")


def random_prompts(rng, length, depth, width):
    return PromptSet.from_arrays(
        {
            PromptSet.layer_name(j): rng.normal(size=(length, width))
            for j in range(depth)
        }
    )


class TestVocabulary:
    def test_from_texts_orders_words_then_specials(self):
        vocab = Vocabulary.from_texts(["a photo of a dog", "A dog!"])
        assert vocab.tokens[:5] == ("!", "a", "dog", "of", "photo")
        assert vocab.tokens[5:] == (SOS_TOKEN, EOS_TOKEN, PAD_TOKEN, UNK_TOKEN)
        assert (vocab.sos_id, vocab.eos_id) == (5, 6)

    def test_duplicate_tokens_raise(self):
        with pytest.raises(ValidationError):
            Vocabulary(("a", "a", "s", "e", "p", "u"), 2, 3, 4, 5)

    def test_save_and_load(self, tmp_path, toy_vocab):
        path = toy_vocab.save(tmp_path / "vocab.json")
        assert Vocabulary.load(path) == toy_vocab


class TestTokenize:
    @pytest.fixture
    def vocab(self):
        return Vocabulary(
            tokens=("a", "photo", "of", "dog", "<s>", "</s>", "<p>", "<u>"),
            sos_id=4,
            eos_id=5,
            pad_id=6,
            unk_id=7,
        )

    def test_direct_lookup(self, vocab):
        sequence = tokenize("a photo of a dog", vocab, 8)
        assert sequence.ids == (4, 0, 1, 2, 0, 3, 5, 6)
        assert sequence.eos_position == 6
        assert not sequence.truncated

    def test_normalizes_case_and_whitespace(self, vocab):
        assert (
            tokenize("A  Photo\tof a DOG", vocab, 8).ids
            == tokenize("a photo of a dog", vocab, 8).ids
        )

    def test_unknown_words(self, vocab):
        assert tokenize("a cat", vocab, 5).ids == (4, 0, 7, 5, 6)

    def test_empty_text_raises(self, vocab):
        with pytest.raises(ValidationError):
            tokenize("", vocab, 8)
        with pytest.raises(ValidationError):
            tokenize("   ", vocab, 8)

    def test_long_text_is_truncated(self, vocab):
        sequence = tokenize(" ".join(["dog"] * 200), vocab, 77)
        assert len(sequence.ids) == 77
        assert sequence.ids[-1] == vocab.eos_id
        assert sequence.eos_position == 76
        assert sequence.truncated


class TestWeights:
    def test_fingerprint_is_stable(self, make_encoder):
        first = make_encoder(seed=3).weights
        second = make_encoder(seed=3).weights
        assert first.fingerprint == second.fingerprint
        assert first.fingerprint != make_encoder(seed=4).fingerprint

    def test_save_and_load(self, tmp_path, toy_encoder):
        manifest, blob = save_weights(
            toy_encoder.weights, tmp_path / "weights.json"
        )
        assert blob.exists()
        loaded = load_weights(manifest)
        assert loaded.fingerprint == toy_encoder.fingerprint
        assert loaded.config == toy_encoder.config

    def test_missing_tensor_raises(self, toy_encoder):
        arrays = dict(toy_encoder.weights.arrays)
        del arrays["ln_final.bias"]
        with pytest.raises(ValidationError):
            type(toy_encoder.weights)(toy_encoder.config, arrays)

    def test_bad_head_count_raises(self):
        with pytest.raises(ValidationError):
            EncoderConfig(10, 1, 10, 3, 2.0, 8, 4)


class TestEncode:
    def test_unit_norm_and_purity(self, toy_encoder):
        tokens = toy_encoder.tokenize("a photo of a cat")
        first = encode(tokens, toy_encoder.weights)
        second = encode(tokens, toy_encoder.weights)
        assert np.linalg.norm(first.vector) == pytest.approx(1.0, abs=1e-9)
        np.testing.assert_array_equal(first.vector, second.vector)

    def test_zero_layers_oracle(self, make_encoder):
        encoder = make_encoder(num_layers=0)
        tokens = encoder.tokenize("a photo of a dog")
        a = encoder.weights.array
        eos = tokens.eos_position
        hidden = a("token_embedding")[tokens.ids[eos]]
        hidden = hidden + a("positional_embedding")[eos]
        hidden = layer_norm(hidden, a("ln_final.weight"), a("ln_final.bias"))
        expected = hidden @ a("text_projection")
        expected /= np.linalg.norm(expected)
        np.testing.assert_allclose(
            encode(tokens, encoder.weights).vector, expected, atol=1e-12
        )

    def test_matches_reference(self, toy_encoder):
        tokens = toy_encoder.tokenize("a dog with floppy ears")
        np.testing.assert_allclose(
            encode(tokens, toy_encoder.weights).vector,
            reference_forward(
                tokens.ids, tokens.eos_position, toy_encoder.weights
            ),
            atol=1e-10,
        )

    def test_batch_matches_single(self, toy_encoder):
        texts = ["a photo of a cat", "a loyal dog that barks at strangers"]
        batch = toy_encoder.encode_texts(texts)
        for row, text in zip(batch, texts):
            single = encode(toy_encoder.tokenize(text), toy_encoder.weights)
            np.testing.assert_allclose(row, single.vector, atol=1e-12)

    def test_id_out_of_range_raises(self, toy_encoder):
        length = toy_encoder.config.context_length
        bad = TokenSequence((toy_encoder.vocab.size,) * length, 1, "bad")
        with pytest.raises(ValidationError):
            encode(bad, toy_encoder.weights)


class TestEncodePrompted:
    def test_empty_prompts_equal_frozen_path(self, toy_encoder):
        prompts = init_prompts(
            toy_encoder.weights, toy_encoder.vocab, length=0, depth=1
        )
        tokens = toy_encoder.tokenize_many(TOY_INPUTS)
        np.testing.assert_array_equal(
            encode_prompted_batch(tokens, prompts, toy_encoder.weights).data,
            encode_batch(tokens, toy_encoder.weights).data,
        )

    def test_single_layer_oracle(self, make_encoder):
        encoder = make_encoder(num_layers=1)
        rng = np.random.default_rng(11)
        prompts = random_prompts(rng, 2, 1, encoder.config.d_model)
        tokens = encoder.tokenize("a photo of a bird")
        np.testing.assert_allclose(
            encode_prompted(tokens, prompts, encoder.weights).vector,
            reference_forward(
                tokens.ids,
                tokens.eos_position,
                encoder.weights,
                [layer.data for layer in prompts.layers],
            ),
            atol=1e-10,
        )

    def test_deep_prompts_match_reference(self, make_encoder):
        encoder = make_encoder(num_layers=3)
        rng = np.random.default_rng(12)
        prompts = random_prompts(rng, 3, 3, encoder.config.d_model)
        tokens = encoder.tokenize("a cat sleeping on a warm sofa")
        np.testing.assert_allclose(
            encode_prompted(tokens, prompts, encoder.weights).vector,
            reference_forward(
                tokens.ids,
                tokens.eos_position,
                encoder.weights,
                [layer.data for layer in prompts.layers],
            ),
            atol=1e-10,
        )

    def test_capacity_overflow(self, make_encoder):
        encoder = make_encoder(context_length=8)
        tokens = encoder.tokenize("a photo of a cat")
        fits = init_prompts(encoder.weights, encoder.vocab, 1, 1)
        encode_prompted(tokens, fits, encoder.weights)
        overflow = init_prompts(encoder.weights, encoder.vocab, 2, 1)
        with pytest.raises(CapacityOverflowError):
            encode_prompted(tokens, overflow, encoder.weights)

    def test_depth_beyond_layers_raises(self, toy_encoder):
        with pytest.raises(ValidationError):
            init_prompts(toy_encoder.weights, toy_encoder.vocab, 2, 3)

    def test_gradients_reach_only_prompts(self, toy_encoder):
        prompts = init_prompts(
            toy_encoder.weights, toy_encoder.vocab, 4, 2, seed=1
        )
        tokens = toy_encoder.tokenize_many(TOY_INPUTS)
        features = encode_prompted_batch(tokens, prompts, toy_encoder.weights)
        target = toy_encoder.encode_texts(TOY_INPUTS[::-1])
        grads = backward(
            mapping_loss(features, target), prompts.parameters().values()
        )
        assert set(grads) == {"prompts.0", "prompts.1"}
        assert all(np.any(grad != 0) for grad in grads.values())


class TestGradientFidelity:
    def test_prompt_gradient_matches_finite_differences(self, make_encoder):
        encoder = make_encoder(num_layers=2, d_model=16, projection_dim=8)
        rng = np.random.default_rng(5)
        prompts = random_prompts(rng, 4, 2, 16)
        tokens = encoder.tokenize_many(TOY_INPUTS)
        target = Tensor.constant(
            encoder.encode_texts(
                ["a small cat", "a loyal dog", "a bird on a branch"]
            )
        )
        shape = (2, 4, 16)

        def loss_of(stacked: np.ndarray) -> tuple[Tensor, PromptSet]:
            candidate = PromptSet.from_arrays(
                {f"prompts.{j}": stacked[j] for j in range(2)}
            )
            predicted = encode_prompted_batch(
                tokens, candidate, encoder.weights
            )
            return mapping_loss(predicted, target), candidate

        point = np.stack([layer.data for layer in prompts.layers])
        loss, candidate = loss_of(point)
        grads = backward(loss, candidate.parameters().values())
        analytic = np.stack([grads["prompts.0"], grads["prompts.1"]])
        numeric = finite_difference_gradient(
            lambda p: loss_of(p.reshape(shape))[0].item(), point, eps=1e-5
        )
        # entries below 1e-6 are compared on that absolute scale
        scale = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-6)
        error = np.abs(analytic - numeric) / scale
        assert error.max() < 1e-4


class TestDeepPromptProperties:
    @pytest.mark.parametrize("seed", range(100))
    def test_causal_mask_and_prompt_replacement(self, seed):
        rng = np.random.default_rng(seed)
        heads = int(rng.integers(1, 3))
        config = EncoderConfig(
            vocab_size=12,
            num_layers=int(rng.integers(1, 4)),
            d_model=4 * heads * int(rng.integers(1, 3)),
            num_heads=heads,
            mlp_ratio=2.0,
            context_length=10,
            projection_dim=4,
        )
        weights = init_weights(config, seed)
        count = int(rng.integers(0, 4))
        depth = int(rng.integers(1, config.num_layers + 1))
        prompts = random_prompts(rng, count, depth, config.d_model)
        eos = config.context_length - 1 - count
        original = random_sequence(rng, 12, config.context_length, eos)

        cut = int(rng.integers(1, config.context_length - 1))
        ids = list(original.ids)
        for position in range(cut + 1, config.context_length):
            ids[position] = int(rng.integers(0, 12))
        perturbed = TokenSequence(tuple(ids), eos, "perturbed")

        before = trace_block_inputs(original, weights, prompts)
        after = trace_block_inputs(perturbed, weights, prompts)
        assert len(before) == config.num_layers + 1
        visible = min(cut + count, config.context_length - 1) + 1
        for first, second in zip(before, after):
            np.testing.assert_array_equal(
                first[:, :visible], second[:, :visible]
            )

        positions = weights.array("positional_embedding")[1 : 1 + count]
        np.testing.assert_array_equal(
            before[0][0, 1 : 1 + count], prompts.layers[0].data + positions
        )
        for layer in range(1, depth):
            np.testing.assert_array_equal(
                before[layer][0, 1 : 1 + count], prompts.layers[layer].data
            )


class TestNearestWords:
    def test_init_text_rows_find_their_words(self, toy_encoder):
        prompts = init_prompts(
            toy_encoder.weights,
            toy_encoder.vocab,
            4,
            2,
            init_text="a photo of a",
        )
        table = nearest_vocab_words(
            prompts, toy_encoder.weights, toy_encoder.vocab, k=3
        )
        assert [rows[0][0] for rows in table[0]] == ["a", "photo", "of", "a"]
        assert all(rows[0][1] == pytest.approx(0.0) for rows in table[0])
        assert len(table) == 2

    def test_full_k_is_a_permutation(self, toy_encoder):
        prompts = random_prompts(np.random.default_rng(1), 2, 1, 16)
        size = toy_encoder.vocab.size
        table = nearest_vocab_words(
            prompts, toy_encoder.weights, toy_encoder.vocab, k=size
        )
        for neighbours in table[0]:
            assert sorted(t for t, _ in neighbours) == sorted(
                toy_encoder.vocab.tokens
            )

    def test_matches_exhaustive_scan(self):
        vocab = Vocabulary.from_texts(["one two three four five six"])
        config = EncoderConfig(vocab.size, 1, 8, 2, 2.0, 8, 4)
        weights = init_weights(config, 9)
        prompts = random_prompts(np.random.default_rng(2), 3, 1, 8)
        table = nearest_vocab_words(prompts, weights, vocab, k=4)
        embeddings = weights.array("token_embedding")
        for vector, neighbours in zip(prompts.layers[0].data, table[0]):
            distances = [
                float(np.sqrt(((embeddings[i] - vector) ** 2).sum()))
                for i in range(vocab.size)
            ]
            order = sorted(range(vocab.size), key=lambda i: distances[i])[:4]
            expected = [vocab.tokens[i] for i in order]
            assert [t for t, _ in neighbours] == expected
            np.testing.assert_allclose(
                [d for _, d in neighbours],
                [distances[i] for i in order],
                atol=1e-12,
            )

    def test_k_out_of_range_raises(self, toy_encoder):
        prompts = random_prompts(np.random.default_rng(1), 1, 1, 16)
        with pytest.raises(ValidationError):
            nearest_vocab_words(
                prompts, toy_encoder.weights, toy_encoder.vocab, k=0
            )
