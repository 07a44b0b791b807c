import pytest
import numpy as np
import torch
from torch.autograd import gradcheck
from torch.func import functional_call
from ..landmarks import LandmarkFrame, LIP_COORDS
from ..model_audio2lm import LossWeights, Stage1Inputs, Stage1Output, JointLoss, Perceptron, LandmarkEncoder
from ..model_audio2lm import MfccEncoder, Audio2Lm, encode_landmarks, encode_mfcc, predict_sequence
from ..model_audio2lm import combine_losses, joint_loss
from ..synth import TEMPLATE


def toy_basis(k=4, seed=0):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(136, k)))
    return (TEMPLATE - TEMPLATE.mean(axis=0)).reshape(-1), q.T


def small_model(k=4, use_msef=True, hidden_dim=5, audio_dim=8, seed=0):
    torch.manual_seed(seed)
    mean, comps = toy_basis(k, seed)
    return Audio2Lm(audio_dim, mean, comps, lm_dim=6, audio_code_dim=4, emotion_dim=4, query_dim=3, n_slots=3,
                    hidden_dim=hidden_dim, use_msef=use_msef).double()


def test_loss_weights():
    w = LossWeights()
    assert (w.alpha, w.beta, w.gamma) == (10., 10., 10.)
    with pytest.raises(ValueError):
        LossWeights(alpha=0.)


def test_encode_landmarks():
    torch.manual_seed(0)
    enc = LandmarkEncoder().double()
    f = LandmarkFrame(TEMPLATE, 'normalized')
    a = encode_landmarks(f, enc)
    b = encode_landmarks(torch.as_tensor(f.flatten()), enc)
    assert a.shape == (512,)
    assert torch.equal(a, b)
    assert encode_landmarks(torch.zeros(3, 136, dtype=torch.float64), enc).shape == (3, 512)
    with pytest.raises(ValueError):
        encode_landmarks(torch.zeros(3, 134, dtype=torch.float64), enc)


def test_encode_mfcc():
    torch.manual_seed(1)
    enc = MfccEncoder(52).double()
    x = np.random.default_rng(0).normal(size=(2, 5, 52))
    out = encode_mfcc(x, enc)
    assert out.shape == (2, 5, 128)
    assert torch.equal(out[0, 0], encode_mfcc(x[0, 0], enc))
    with pytest.raises(ValueError):
        encode_mfcc(np.zeros((1, 13)), enc)


def test_perceptron_oracle():
    enc = Perceptron(4, 2, hidden_dim=3).double()
    W1 = np.array([[1., 0., -1., 0.5], [0., 2., 0., 0.], [-1., -1., -1., -1.]])
    b1 = np.array([0., -1., 0.5])
    W2 = np.array([[1., 1., 1.], [2., -1., 0.]])
    b2 = np.array([0.5, 0.])
    with torch.no_grad():
        enc.fc1.weight.copy_(torch.as_tensor(W1))
        enc.fc1.bias.copy_(torch.as_tensor(b1))
        enc.fc2.weight.copy_(torch.as_tensor(W2))
        enc.fc2.bias.copy_(torch.as_tensor(b2))
    x = np.array([1., 2., -1., 0.])
    # fc1 = [2, 3, -1.5] -> relu [2, 3, 0] -> fc2 = [5.5, 1]
    out = enc(torch.as_tensor(x)).detach().numpy()
    assert np.allclose(out, [5.5, 1.], atol=1e-12)


def test_stage1_inputs():
    inputs = Stage1Inputs(torch.zeros(136), torch.zeros(7, 8))
    assert inputs.ref_landmarks.shape == (1, 136)
    assert inputs.audio.shape == (1, 7, 8)
    with pytest.raises(ValueError):
        Stage1Inputs(torch.zeros(136), torch.zeros(7, 8), torch.zeros(6, 4))


def test_predict_sequence():
    model = small_model()
    ref = torch.as_tensor(TEMPLATE.reshape(1, -1))
    audio = torch.randn(1, 1, 8, dtype=torch.float64)
    out = predict_sequence(model, Stage1Inputs(ref, audio))
    assert out.n_frames == 1
    assert out.pca_seq.shape == (1, 1, 4)
    assert out.landmark_seq.shape == (1, 1, 136)
    assert out.emotion_probs.shape == (1, 1, 8)
    assert len(out.frames(0)) == 1
    assert out.frames(0)[0].coord_space == 'normalized'

    # Shapes are reconstructions of the coefficients
    recon = out.pca_seq @ model.pca_components + model.pca_mean
    assert torch.allclose(out.landmark_seq, recon)

    with pytest.raises(ValueError):
        predict_sequence(model, Stage1Inputs(ref, torch.zeros(1, 0, 8, dtype=torch.float64)))


def test_predict_sequence_causal():
    model = small_model()
    ref = torch.as_tensor(TEMPLATE.reshape(1, -1))
    audio = torch.randn(2, 6, 8, dtype=torch.float64)
    ref = ref.repeat(2, 1)
    short = model(ref, audio)
    long = model(ref, torch.cat([audio, audio], dim=1))
    assert long.n_frames == 12
    assert torch.allclose(long.hidden[:, :6], short.hidden, atol=1e-12)
    assert torch.allclose(long.landmark_seq[:, :6], short.landmark_seq, atol=1e-12)

    # Deterministic
    again = model(ref, audio)
    assert torch.equal(again.pca_seq, short.pca_seq)


def test_predict_sequence_lstm_oracle():
    model = small_model(k=2, use_msef=False, hidden_dim=2)
    ref = torch.as_tensor(TEMPLATE.reshape(1, -1))
    audio = torch.randn(1, 3, 8, dtype=torch.float64)
    out = model(ref, audio)

    with torch.no_grad():
        x = (audio - model.feat_mean) / model.feat_std
        lm = model.lm_encoder(ref)[0]
        a = model.audio_encoder(x)[0]
        W_ih, W_hh = model.lstm.weight_ih_l0, model.lstm.weight_hh_l0
        b = model.lstm.bias_ih_l0 + model.lstm.bias_hh_l0

        def sigmoid(z):
            return 1 / (1 + torch.exp(-z))

        h = torch.zeros(2, dtype=torch.float64)
        c = torch.zeros(2, dtype=torch.float64)
        for t in range(3):
            inp = torch.cat([lm, a[t], torch.zeros(4, dtype=torch.float64)])
            z = W_ih @ inp + W_hh @ h + b
            i, f, g, o = sigmoid(z[0:2]), sigmoid(z[2:4]), torch.tanh(z[4:6]), sigmoid(z[6:8])
            c = f * c + i * g
            h = o * torch.tanh(c)
            assert torch.allclose(out.hidden[0, t], h, atol=1e-12)
            pca = model.head.weight @ h + model.head.bias
            assert torch.allclose(out.pca_seq[0, t], pca, atol=1e-12)

    assert out.emotion_probs is None


def test_use_msef_switch():
    model = small_model(use_msef=False)
    ref = torch.as_tensor(TEMPLATE.reshape(1, -1))
    audio = torch.randn(1, 4, 8, dtype=torch.float64)
    out = model(ref, audio)
    assert out.emotion_probs is None

    # External emotion features bypass MSEF
    model = small_model()
    out = model(ref, audio, torch.zeros(1, 4, 4, dtype=torch.float64))
    assert out.emotion_probs is None


def test_feature_stats():
    model = small_model()
    model.set_feature_stats(np.ones(8), np.zeros(8))
    assert torch.all(model.feat_mean == 1.)
    assert torch.all(model.feat_std == 1e-6)


def test_combine_losses():
    rng = np.random.default_rng(0)
    w = LossWeights()
    for _ in range(100):
        c = rng.uniform(0, 10, 4)
        assert abs(combine_losses(*c, w) - (c[0] + 10 * (c[1] + c[2] + c[3]))) < 1e-9
    w = LossWeights(1., 2., 3.)
    assert combine_losses(1., 1., 1., 1., w) == 7.


def test_joint_loss():
    rng = np.random.default_rng(1)
    pca = torch.as_tensor(rng.normal(size=(2, 5, 4)))
    shapes = torch.as_tensor(rng.normal(size=(2, 5, 136)))
    truth = Stage1Output(pca, shapes)
    labels = torch.eye(8, dtype=torch.float64)[[0, 1]][:, None].repeat(1, 5, 1)

    loss = joint_loss(Stage1Output(pca.clone(), shapes.clone()), truth, labels.clone(), labels)
    assert isinstance(loss, JointLoss)
    d = loss.as_dict()
    assert set(d) == {'total', 'pca', 'landmark', 'lip', 'ec'}
    assert d['pca'] == 0 and d['landmark'] == 0 and d['lip'] == 0
    assert d['ec'] < 1e-6
    assert d['total'] < 1e-5

    loss = joint_loss(Stage1Output(pca, shapes + 1.), truth)
    assert abs(loss.landmark.item() - 1.) < 1e-12
    assert abs(loss.lip.item() - 1.) < 1e-12
    assert loss.ec.item() == 0.
    assert abs(loss.total.item() - 20.) < 1e-9

    # Non-lip points only move L_landmark
    moved = shapes.clone()
    mask = np.ones(136, dtype=bool)
    mask[LIP_COORDS] = False
    moved[..., torch.as_tensor(np.where(mask)[0])] += 0.5
    loss = joint_loss(Stage1Output(pca, moved), truth)
    assert loss.landmark.item() > 0
    assert loss.lip.item() == 0

    with pytest.raises(ValueError):
        joint_loss(Stage1Output(pca[:, :4], shapes[:, :4]), truth)
    with pytest.raises(ValueError):
        joint_loss(truth, truth, labels)


def test_joint_loss_gradcheck():
    model = small_model(k=3, hidden_dim=3, audio_dim=4)
    ref = torch.as_tensor(TEMPLATE.reshape(1, -1))
    audio = torch.randn(1, 4, 4, dtype=torch.float64)
    rng = np.random.default_rng(2)
    truth = Stage1Output(torch.as_tensor(rng.normal(size=(1, 4, 3))), torch.as_tensor(rng.normal(size=(1, 4, 136))))
    labels = torch.eye(8, dtype=torch.float64)[[2]][:, None].repeat(1, 4, 1)
    with torch.no_grad():
        model.msef.memory.g2.weight.normal_(0, 0.3)

    names = ['lstm.weight_ih_l0', 'lstm.weight_hh_l0', 'lstm.bias_ih_l0', 'lstm.bias_hh_l0', 'head.weight',
             'head.bias', 'lm_encoder.fc2.bias', 'audio_encoder.fc2.weight', 'msef.memory.M2']
    params = dict(model.named_parameters())

    def loss_fn(*tensors):
        out = functional_call(model, dict(zip(names, tensors)), (ref, audio))
        return joint_loss(out, truth, out.emotion_probs, labels).total

    inputs = tuple(params[n].detach().clone().requires_grad_(True) for n in names)
    assert gradcheck(loss_fn, inputs, eps=1e-5, atol=1e-6, rtol=1e-4)
