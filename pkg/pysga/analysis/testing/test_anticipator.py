"""Test the autoregressive baseline variants."""

import numpy as np
import pytest

from pysga.analysis import autodiff as ad
from pysga.analysis import anticipator as ant
from pysga.analysis.model_creation import (create_params, loss_weights,
                                           predict_windows)
from pysga.analysis.heads_losses import total_loss
from pysga.analysis.utilities import ContractError, ConfigError
from pysga.analysis.testing.helpers import small_cfg, video_tensors


def _setup(strModel='baseline_plus_plus', varSeed=3):
    cfg = small_cfg(strModel=strModel, varSeed=varSeed)
    return cfg, create_params(cfg, 5, 4)


def _context(varLen=4, varNumPair=2, varSeed=0):
    return ad.as_tensor(np.random.default_rng(varSeed).normal(
        size=(varNumPair, varLen, 16)))


def _scores(lstDst):
    return np.array([objDst.scores for objDst in lstDst])


def test_zero_horizon():
    _, dicPrm = _setup()
    objCtx = _context()
    lstOut, objCtxOut = ant.anticipate_autoregressive(objCtx, 0, dicPrm)
    assert lstOut == []
    assert objCtxOut.shape == objCtx.shape


def test_context_grows():
    """Generated representations are appended to the context."""
    _, dicPrm = _setup()
    objCtx = _context(varLen=4)
    lstOut, objCtxOut = ant.anticipate_autoregressive(objCtx, 3, dicPrm)

    assert len(lstOut) == 3
    assert objCtxOut.shape == (2, 7, 16)
    np.testing.assert_array_equal(objCtxOut.data[:, :4], objCtx.data)
    for idxHrz, objOut in enumerate(lstOut):
        assert objOut.shape == (2, 16)
        np.testing.assert_array_equal(objCtxOut.data[:, 4 + idxHrz],
                                      objOut.data)


def test_empty_context():
    _, dicPrm = _setup()
    with pytest.raises(ContractError):
        ant.anticipate_autoregressive(ad.as_tensor(np.zeros((2, 0, 16))), 1,
                                      dicPrm)


def test_context_exceeds_positions():
    cfg = small_cfg(strModel='baseline_plus', varMaxFrm=16)
    dicPrm = create_params(cfg, 5, 4)
    with pytest.raises(ContractError, match='positional'):
        ant.anticipate_autoregressive(_context(varLen=16), 2, dicPrm)


def test_step_depends_on_previous_output():
    """Perturbing the first generated frame changes the second."""
    _, dicPrm = _setup()
    objCtx = _context(varLen=3)
    lstOut, _ = ant.anticipate_autoregressive(objCtx, 2, dicPrm)

    # Second step computed from a perturbed first output:
    aryFst = lstOut[0].data + 0.5
    objCtxPrt = ad.as_tensor(np.concatenate([objCtx.data, aryFst[:, None]],
                                            axis=1))
    objY = ant.anticipator_forward(objCtxPrt, np.ones((2, 4), dtype=bool),
                                   dicPrm)
    assert not np.allclose(objY.data[:, -1], lstOut[1].data)

    # Unperturbed recomputation reproduces the second output:
    objCtxUnp = ad.as_tensor(np.concatenate(
        [objCtx.data, lstOut[0].data[:, None]], axis=1))
    objY = ant.anticipator_forward(objCtxUnp, np.ones((2, 4), dtype=bool),
                                   dicPrm)
    np.testing.assert_allclose(objY.data[:, -1], lstOut[1].data, rtol=1e-5,
                               atol=1e-6)


def test_determinism():
    _, dicPrm = _setup()
    lstOut01, _ = ant.anticipate_autoregressive(_context(), 3, dicPrm)
    lstOut02, _ = ant.anticipate_autoregressive(_context(), 3, dicPrm)
    for objOut01, objOut02 in zip(lstOut01, lstOut02):
        np.testing.assert_array_equal(objOut01.data, objOut02.data)


def test_run_variant_plus():
    """Variant 1: anticipated distributions only."""
    _, dicPrm = _setup('baseline_plus')
    objVt = video_tensors(tplPairRng=(2, 3))
    dicOut = ant.run_variant(objVt, dicPrm, 'baseline_plus', 3, 1)

    assert dicOut['obs'] is None
    assert len(dicOut['ant']) == 1
    varNumPrs = int(np.sum(objVt.aryPrsPair[2]))
    assert len(dicOut['ant'][0]) == varNumPrs
    for objDst in dicOut['ant'][0]:
        assert len(objDst.scores) == 4
        assert sum(objDst.scores) == pytest.approx(1.0)
    assert [objDst.pair for objDst in dicOut['ant'][0]] == \
        [(0, idx + 1) for idx in range(varNumPrs)]


def test_run_variant_plus_plus():
    """Variant 2: observed and anticipated distributions."""
    _, dicPrm = _setup()
    objVt = video_tensors()
    dicOut = ant.run_variant(objVt, dicPrm, 'baseline_plus_plus', 4, 2)
    assert len(dicOut['ant']) == 2
    assert len(dicOut['obs']) == 4
    for idxFrm, lstDst in enumerate(dicOut['obs']):
        assert len(lstDst) == int(np.sum(objVt.aryPrsPair[idxFrm]))


def test_temporal_pre_pass_ablation():
    """Without the temporal pre-pass both variants anticipate alike."""
    _, dicPrm = _setup()
    objVt = video_tensors()
    dicPls = ant.run_variant(objVt, dicPrm, 'baseline_plus', 4, 2)
    dicOff = ant.run_variant(objVt, dicPrm, 'baseline_plus_plus', 4, 2,
                             lgcTmpEnc=False)
    dicOn = ant.run_variant(objVt, dicPrm, 'baseline_plus_plus', 4, 2)
    for idxHrz in range(2):
        np.testing.assert_array_equal(_scores(dicOff['ant'][idxHrz]),
                                      _scores(dicPls['ant'][idxHrz]))
    assert not np.allclose(_scores(dicOn['ant'][0]),
                           _scores(dicPls['ant'][0]))


def test_invalid_variant():
    _, dicPrm = _setup()
    with pytest.raises(ConfigError):
        ant.run_variant(video_tensors(), dicPrm, 'scenesayer_ode', 3, 1)
    with pytest.raises(ContractError):
        ant.run_variant(video_tensors(), dicPrm, 'baseline_plus', 0, 1)


@pytest.mark.parametrize('strModel', ant.lstVariants)
def test_predict_windows_uses_variant(strModel):
    """Evaluation windows reproduce the variant run of each observed length."""
    cfg, dicPrm = _setup(strModel)
    objVt = video_tensors(tplPairRng=(2, 3))
    lstPrd = predict_windows(objVt, dicPrm, cfg, [3, 4], 2)
    for varObs, (aryPrb, vecLgcPair) in zip([3, 4], lstPrd):
        dicOut = ant.run_variant(objVt, dicPrm, strModel, varObs, 2)
        np.testing.assert_array_equal(vecLgcPair,
                                      objVt.aryPrsPair[varObs - 1])
        for idxHrz in range(2):
            aryExp = _scores(dicOut['ant'][idxHrz]).reshape(-1, 4)
            np.testing.assert_allclose(aryPrb[idxHrz][vecLgcPair], aryExp)
            assert np.all(aryPrb[idxHrz][~vecLgcPair] == 0.0)



@pytest.mark.parametrize('strModel', ant.lstVariants)
def test_teacher_forcing_horizon_one(strModel):
    """With horizon 1, teacher forcing and free running give equal losses."""
    cfg, dicPrm = _setup(strModel)
    objVt = video_tensors(tplFrmRng=(7, 7), tplPairRng=(2, 3))
    objLmb = loss_weights(cfg)

    _, lstTch, tplTch = ant.baseline_loss_terms(objVt, dicPrm, strModel,
                                                objLmb, 1, lgcTchFrc=True)
    _, lstFre, tplFre = ant.baseline_loss_terms(objVt, dicPrm, strModel,
                                                objLmb, 1, lgcTchFrc=False)
    assert tplTch == tplFre
    for strKey in ('ant', 'recon'):
        assert float(lstTch[0][strKey].data) == pytest.approx(
            float(lstFre[0][strKey].data), rel=1e-4)


def test_baseline_gradients():
    """The baseline loss reaches the anticipator parameters."""
    cfg, dicPrm = _setup()
    objVt = video_tensors(tplFrmRng=(6, 6))
    dicObs, lstAnt, _ = ant.baseline_loss_terms(objVt, dicPrm,
                                                'baseline_plus_plus',
                                                loss_weights(cfg), 3)
    ad.backward(total_loss(dicObs, lstAnt, loss_weights(cfg)))
    assert dicPrm['ant_tf.0.wq.w'].grad is not None
    assert np.any(dicPrm['ant_pos'].grad != 0.0)
    assert np.any(dicPrm['head_gen.l1.w'].grad != 0.0)
