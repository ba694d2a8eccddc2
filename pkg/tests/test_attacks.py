import numpy as np
import pydantic
import pytest

from hypothesis import given, settings, strategies as st

from attacks import adversarial_file
from attacks.baselines import baseline, ifgsm, momentum_ifgsm, project
from attacks.ila import channel_ila, ila_attack, ila_loss, ila_losses, ila_refine
from attacks.pipeline import chunks, generate
from core.tensor import Tensor
from exceptions import AdversarialFileError, ConfigError, DegenerateBaseline, DegenerateCurrent, ShapeError
from records.models import AttackConfig, AttackPipeline
from zoo.network import build

from conftest import linear_network, network_from_blocks


def softmax(z):

	z = z - z.max(axis=1, keepdims=True)

	return np.exp(z) / np.exp(z).sum(axis=1, keepdims=True)


@pytest.fixture
def linear_case():

	rng = np.random.default_rng(11)
	weight = (0.05 * rng.standard_normal((10, 3072))).astype(np.float32)
	bias = (0.1 * rng.standard_normal(10)).astype(np.float32)
	images = rng.uniform(-0.5, 0.5, size=(3, 3, 32, 32)).astype(np.float32)
	labels = np.array([ 1, 4, 7 ])

	return linear_network(weight, bias), weight.astype(np.float64), bias.astype(np.float64), images, labels


def input_gradient(weight, bias, images, labels):
	"""Closed form of d mean CE / dx for softmax regression, up to the positive 1/N factor."""

	flat = images.reshape(len(images), -1).astype(np.float64)
	residual = softmax(flat @ weight.T + bias)
	residual[np.arange(len(labels)), labels] -= 1

	return (residual @ weight).reshape(images.shape)


##################################################
# Baselines

@pytest.mark.parametrize("attack", [ ifgsm, momentum_ifgsm ])
def test_zero_iterations_return_clean(attack, plain_model, small_batch):

	images, labels = small_batch
	adversarial = attack(plain_model, images, labels, AttackConfig(iterations=0))

	np.testing.assert_array_equal(adversarial, images)


def test_tiny_epsilon_pins_the_image(plain_model, small_batch):

	images, labels = small_batch
	adversarial = ifgsm(plain_model, images, labels, AttackConfig(epsilon=1e-9, step_size=0.01, iterations=3))

	assert np.max(np.abs(adversarial.astype(np.float64) - images)) <= 2e-9


def test_ifgsm_step_matches_closed_form(linear_case):

	model, weight, bias, images, labels = linear_case
	cfg = AttackConfig(epsilon=0.03, step_size=0.01, iterations=1)

	expected = images + 0.01 * np.sign(input_gradient(weight, bias, images, labels))

	np.testing.assert_allclose(ifgsm(model, images, labels, cfg), expected, atol=1e-6)


def test_momentum_recurrence_two_steps(linear_case):

	model, weight, bias, images, labels = linear_case
	cfg = AttackConfig(epsilon=0.03, step_size=0.01, iterations=2, momentum_decay=0.8)

	x, accumulated = images.astype(np.float64), np.zeros(images.shape)

	for _ in range(2):
		grad = input_gradient(weight, bias, x, labels)
		accumulated = 0.8 * accumulated + grad / np.abs(grad).sum(axis=(1, 2, 3), keepdims=True)
		x = np.clip(np.clip(x + 0.01 * np.sign(accumulated), images - 0.03, images + 0.03), -1, 1)

	np.testing.assert_allclose(momentum_ifgsm(model, images, labels, cfg), x, atol=1e-6)


def test_momentum_without_decay_is_ifgsm(plain_model, small_batch):

	images, labels = small_batch
	cfg = AttackConfig(epsilon=0.05, step_size=0.01, iterations=4, momentum_decay=0.0)

	np.testing.assert_array_equal(momentum_ifgsm(plain_model, images, labels, cfg), ifgsm(plain_model, images, labels, cfg))


@given(
	epsilon=st.floats(min_value=1e-3, max_value=0.2),
	step=st.floats(min_value=1e-3, max_value=0.1),
	iterations=st.integers(min_value=0, max_value=4),
	method=st.sampled_from([ "ifgsm", "mifgsm" ])
)
@settings(max_examples=10, deadline=None)
def test_iterates_stay_in_bounds(epsilon, step, iterations, method):

	model = build("plain_cnn", 0)
	images = np.random.default_rng(0).uniform(-1, 1, size=(2, 3, 32, 32)).astype(np.float32)
	cfg = AttackConfig(epsilon=epsilon, step_size=step, iterations=iterations)

	adversarial = baseline(method)(model, images, [ 0, 1 ], cfg)

	assert np.max(np.abs(adversarial - images)) <= epsilon + 1e-6
	assert np.max(np.abs(adversarial)) <= 1.0


def test_project_clips_ball_then_range():

	clean = np.array([ 0.99, 0.0 ], dtype=np.float32)
	out = project(np.array([ 1.5, -0.5 ], dtype=np.float32), clean, 0.05)

	np.testing.assert_allclose(out, [ 1.0, -0.05 ])


def test_unknown_baseline():

	with pytest.raises(ConfigError):
		baseline("pgd")


##################################################
# ILA objective

def test_ila_loss_identity():

	ref = np.random.default_rng(0).standard_normal(50)

	assert ila_loss(ref, Tensor(ref), 3.0).item() == pytest.approx(4.0, abs=1e-5)


def test_ila_loss_scaling():

	ref = np.random.default_rng(1).standard_normal(50)

	assert ila_loss(ref, Tensor(2 * ref), 3.0).item() == pytest.approx(7.0, abs=1e-5)


def test_ila_loss_orthogonal():

	ref = np.array([ 3.0, 0.0, 0.0, 0.0 ])

	assert ila_loss(ref, Tensor([ 0.0, 3.0, 0.0, 0.0 ]), 5.0).item() == pytest.approx(5.0, abs=1e-5)


def test_ila_loss_degenerate_inputs():

	with pytest.raises(DegenerateBaseline):
		ila_loss(np.zeros(4), Tensor([ 1.0, 0.0, 0.0, 0.0 ]), 3.0)

	with pytest.raises(DegenerateCurrent):
		ila_loss(np.ones(4), Tensor(np.zeros(4)), 3.0)


def test_batched_losses_match_single_sample():

	rng = np.random.default_rng(2)
	ref = rng.standard_normal((3, 20))
	current = rng.standard_normal((3, 20))

	batched = ila_losses(ref, np.linalg.norm(ref, axis=1), Tensor(current), 2.0).data
	single = [ ila_loss(ref[row], Tensor(current[row]), 2.0).item() for row in range(3) ]

	np.testing.assert_allclose(batched, single, rtol=1e-5)


##################################################
# ILA attack

def test_zero_ila_iterations_return_baseline(plain_model, small_batch, quick_attack):

	images, labels = small_batch
	baseline_batch = ifgsm(plain_model, images, labels, quick_attack)
	cfg = AttackConfig(epsilon=0.1, iterations=0, target_layer=2)

	np.testing.assert_array_equal(ila_attack(plain_model, images, baseline_batch, labels, cfg), baseline_batch)


def test_objective_starts_at_alpha_plus_one(plain_model, small_batch, quick_attack, quick_ila):

	images, labels = small_batch
	baseline_batch = ifgsm(plain_model, images, labels, quick_attack)
	trace = ila_refine(plain_model, images, baseline_batch, labels, quick_ila)

	assert trace.degenerate == []
	np.testing.assert_allclose(trace.initial_loss, quick_ila.alpha + 1, atol=1e-4)
	assert np.all(np.isfinite(trace.final_loss))


def test_ila_stays_in_bounds(plain_model, small_batch, quick_attack, quick_ila):

	images, labels = small_batch
	baseline_batch = momentum_ifgsm(plain_model, images, labels, quick_attack)
	refined = ila_attack(plain_model, images, baseline_batch, labels, quick_ila)

	assert np.max(np.abs(refined - images)) <= quick_ila.epsilon + 1e-6
	assert np.max(np.abs(refined)) <= 1.0
	assert not np.array_equal(refined, baseline_batch)


def test_degenerate_samples_pass_through(plain_model, small_batch, quick_attack, quick_ila):

	images, labels = small_batch
	baseline_batch = ifgsm(plain_model, images, labels, quick_attack)
	baseline_batch[2] = images[2]

	trace = ila_refine(plain_model, images, baseline_batch, labels, quick_ila)

	assert trace.degenerate == [ 2 ]
	np.testing.assert_array_equal(trace.adversarial[2], images[2])
	assert np.isnan(trace.final_loss[2])


def test_ila_needs_a_concrete_layer(plain_model, small_batch):

	images, labels = small_batch

	for layer in ( None, "auto" ):
		with pytest.raises(ConfigError):
			ila_attack(plain_model, images, images, labels, AttackConfig(target_layer=layer))

	with pytest.raises(ShapeError):
		ila_attack(plain_model, images, images, labels, AttackConfig(target_layer=plain_model.depth))


def test_single_channel_layer_matches_layer_ila(small_batch, quick_attack):

	model = network_from_blocks([
		{ "type": "conv", "name": "squeeze", "in": 3, "out": 1, "pool": "max" },
		{ "type": "classifier", "name": "linear", "in": 256, "classes": 10 }
	])
	images, labels = small_batch
	baseline_batch = ifgsm(model, images, labels, quick_attack)
	cfg = AttackConfig(epsilon=0.1, step_size=1.0, iterations=2, target_layer=0, target_channel=0)

	np.testing.assert_allclose(channel_ila(model, images, baseline_batch, labels, cfg),
		ila_attack(model, images, baseline_batch, labels, cfg.copy(update={ "target_channel": None })), atol=1e-7)


def test_channel_ila_needs_a_channel(plain_model, small_batch):

	images, labels = small_batch

	with pytest.raises(ConfigError):
		channel_ila(plain_model, images, images, labels, AttackConfig(target_layer=0))

	with pytest.raises(ShapeError):
		channel_ila(plain_model, images, images, labels, AttackConfig(target_layer=0, target_channel=16))


##################################################
# Pipelines

def test_chunks():

	assert chunks(7, 3) == [ (0, 3), (3, 6), (6, 7) ]
	assert chunks(0, 3) == []


def test_descriptors(quick_attack, quick_ila):

	assert AttackPipeline(method="mifgsm", baseline=quick_attack).descriptor == "mifgsm-3"
	assert AttackPipeline(baseline=quick_attack, ila=quick_ila).descriptor == "ila-ifgsm-3+2@1"


def test_pipeline_needs_one_epsilon(quick_attack):

	with pytest.raises(pydantic.ValidationError):
		AttackPipeline(baseline=quick_attack, ila=AttackConfig(epsilon=0.2, target_layer=1))


def test_generate_ignores_thread_count(plain_model, small_batch, quick_attack, quick_ila):

	images, labels = small_batch
	pipeline = AttackPipeline(baseline=quick_attack, ila=quick_ila)

	single = generate(plain_model, images, labels, pipeline, chunk_size=2, threads=1)
	pooled = generate(plain_model, images, labels, pipeline, chunk_size=2, threads=3)

	np.testing.assert_array_equal(single.baseline, pooled.baseline)
	np.testing.assert_array_equal(single.adversarial, pooled.adversarial)
	assert len(single) == 6


def test_generate_without_ila(plain_model, small_batch, quick_attack):

	images, labels = small_batch
	triple = generate(plain_model, images, labels, AttackPipeline(baseline=quick_attack), chunk_size=4)

	assert triple.refined is None
	assert triple.adversarial is triple.baseline
	np.testing.assert_array_equal(triple.baseline[:4], ifgsm(plain_model, images[:4], labels[:4], quick_attack))


##################################################
# Adversarial files

def test_adversarial_file_round_trip(tmp_path, small_batch):

	images, labels = small_batch
	adversarial = np.clip(images + 0.01, -1, 1)
	path = str(tmp_path / "adv.bin")

	adversarial_file.write_adversarial(path, np.arange(6) + 100, labels, images, adversarial, 0.03)
	loaded = adversarial_file.read_adversarial(path)

	assert len(loaded) == 6
	assert loaded.indices.tolist() == list(range(100, 106))
	assert loaded.epsilon == pytest.approx(0.03)
	np.testing.assert_array_equal(loaded.adversarial, adversarial)
	np.testing.assert_array_equal(loaded.clean, images)


def test_adversarial_file_errors(tmp_path, small_batch):

	images, labels = small_batch
	payload = adversarial_file.dumps(np.arange(6), labels, images, images, 0.03)

	with pytest.raises(AdversarialFileError, match="magic"):
		adversarial_file.loads(b"NOPE" + payload[4:])

	with pytest.raises(AdversarialFileError):
		adversarial_file.loads(payload[:-1])

	with pytest.raises(AdversarialFileError):
		adversarial_file.dumps(np.arange(5), labels, images, images, 0.03)

	with pytest.raises(AdversarialFileError):
		adversarial_file.read_adversarial(str(tmp_path / "missing.bin"))
