"""Test loss terms, loss weights, heads and window bookkeeping."""

import numpy as np
import pytest
from hypothesis import given, settings, HealthCheck, strategies as st

from pysga.analysis import autodiff as ad
from pysga.analysis import heads_losses as hl
from pysga.analysis.model_creation import (lstModels, create_params,
                                           model_loss, loss_weights)
from pysga.analysis.utilities import ContractError, ConfigError
from pysga.analysis.testing.gradcheck import check_gradient
from pysga.analysis.testing.helpers import small_cfg, video_tensors


def _val(objTns):
    return float(ad.as_tensor(objTns).data)


# *****************************************************************************
# *** Predicate margin loss

@pytest.mark.parametrize('lstScr, lstPos, varExp', [
    ([2.5, 0.1], [0], 0.0),
    ([0.9, 0.1], [0], 0.2),
    ([0.0, 0.0, 0.0], [0, 1], 2.0)])
def test_margin_examples(lstScr, lstPos, varExp):
    with ad.precision(np.float64):
        objLoss = hl.predicate_margin_loss(ad.as_tensor(np.array(lstScr)),
                                           lstPos)
    assert _val(objLoss) == pytest.approx(varExp, abs=1e-12)


def test_margin_multi_hot():
    """Multi-hot rows with weights."""
    aryScr = np.array([[0.9, 0.1, 0.0], [0.0, 0.0, 0.0]])
    aryPos = np.array([[True, False, False], [True, True, False]])
    with ad.precision(np.float64):
        objLoss = hl.predicate_margin_loss(ad.as_tensor(aryScr), aryPos,
                                           vecWgt=np.array([1.0, 0.5]))
    # Row 0: 0.2 + 0.1, row 1: 2 * 0.5.
    assert _val(objLoss) == pytest.approx(1.3)


def test_margin_errors():
    with pytest.raises(ContractError, match='positive'):
        hl.predicate_margin_loss(ad.as_tensor(np.zeros(3)), [])
    with pytest.raises(ContractError, match='range'):
        hl.predicate_margin_loss(ad.as_tensor(np.zeros(3)), [3])


@settings(max_examples=100, deadline=None,
          suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.lists(st.floats(-5.0, 5.0), min_size=2, max_size=6),
       st.floats(-100.0, 100.0), st.data())
def test_margin_shift_invariance(lstScr, varSft, objData):
    """Adding a constant to all scores leaves the loss unchanged."""
    lstPos = objData.draw(st.lists(st.integers(0, len(lstScr) - 1),
                                   min_size=1, unique=True))
    with ad.precision(np.float64):
        varLoss = _val(hl.predicate_margin_loss(
            ad.as_tensor(np.array(lstScr)), lstPos))
        varSftLoss = _val(hl.predicate_margin_loss(
            ad.as_tensor(np.array(lstScr) + varSft), lstPos))
    assert varLoss >= 0.0
    assert varSftLoss == pytest.approx(varLoss, abs=1e-9)


def test_margin_gradient():
    with ad.precision(np.float64):
        objScr = ad.parameter(np.array([[0.3, -0.2, 0.4, 1.9],
                                        [0.05, 0.7, -0.45, 0.2]]), 's')
        aryPos = np.array([[True, False, True, False],
                           [False, True, False, False]])
        assert check_gradient(
            lambda: hl.predicate_margin_loss(objScr, aryPos), [objScr],
            varStp=1e-6) < 1e-6
# *****************************************************************************


# *****************************************************************************
# *** Object, box and reconstruction losses

def test_object_ce():
    with ad.precision(np.float64):
        aryUni = np.full((2, 4), 0.25)
        objLoss = hl.object_ce_loss(ad.as_tensor(aryUni[:1]), [2])
        assert _val(objLoss) == pytest.approx(np.log(4.0))
        objLoss = hl.object_ce_loss(ad.as_tensor(aryUni), [0, 3])
        assert _val(objLoss) == pytest.approx(2.0 * np.log(4.0))
        objLoss = hl.object_ce_loss(ad.as_tensor(np.eye(3)), [0, 1, 2])
        assert _val(objLoss) == pytest.approx(0.0)


def test_object_ce_clamp():
    """Zero probability at the target is clamped and counted."""
    varCnt = hl.dicWarnCnt['object_ce_clamp']
    with ad.precision(np.float64):
        objLoss = hl.object_ce_loss(ad.as_tensor(np.array([[1.0, 0.0]])), [1])
    assert _val(objLoss) == pytest.approx(-np.log(1e-12))
    assert hl.dicWarnCnt['object_ce_clamp'] == varCnt + 1


def test_object_ce_not_normalised():
    with pytest.raises(ContractError):
        hl.object_ce_loss(ad.as_tensor(np.array([[0.5, 0.6]])), [0])


@pytest.mark.parametrize('varErr, varExp', [(0.0, 0.0), (0.5, 0.125),
                                            (2.0, 1.5), (-2.0, 1.5)])
def test_bbox_loss(varErr, varExp):
    aryGt = np.array([[0.1, 0.2, 0.4, 0.6]])
    aryPred = aryGt.copy()
    aryPred[0, 2] += varErr
    with ad.precision(np.float64):
        objLoss = hl.bbox_regression_loss(ad.as_tensor(aryPred), aryGt)
    assert _val(objLoss) == pytest.approx(varExp)


def test_bbox_shape_mismatch():
    with pytest.raises(ContractError):
        hl.bbox_regression_loss(ad.as_tensor(np.zeros((2, 4))),
                                np.zeros((3, 4)))


def test_reconstruction_loss():
    """Smooth-L1 total of 0.4 with two objects gives 0.1."""
    aryZ = np.zeros((1, 4))
    # Smooth-L1 of sqrt(0.8) is 0.4:
    aryZhat = np.array([[np.sqrt(0.8), 0.0, 0.0, 0.0]])
    with ad.precision(np.float64):
        objLoss = hl.reconstruction_loss(ad.as_tensor(aryZ),
                                         ad.as_tensor(aryZhat), 2)
        objSym = hl.reconstruction_loss(ad.as_tensor(aryZhat),
                                         ad.as_tensor(aryZ), 2)
        objZero = hl.reconstruction_loss(ad.as_tensor(aryZhat),
                                         ad.as_tensor(aryZhat), 2)
    assert _val(objLoss) == pytest.approx(0.1)
    assert _val(objSym) == pytest.approx(_val(objLoss))
    assert _val(objZero) == 0.0


def test_reconstruction_mismatch():
    with pytest.raises(ContractError, match='pair sets'):
        hl.reconstruction_loss(ad.as_tensor(np.zeros((2, 4))),
                               ad.as_tensor(np.zeros((3, 4))), 2)
# *****************************************************************************


# *****************************************************************************
# *** Total loss and weights

def test_total_loss_unit_terms():
    objOne = ad.as_tensor(1.0)
    dicObs = {'gen': objOne, 'object': objOne}
    lstAnt = [{'ant': objOne, 'boxes': objOne, 'recon': objOne}]
    assert _val(hl.total_loss(dicObs, lstAnt, hl.LossWeights())) == 8.0
    assert _val(hl.total_loss({}, [], hl.LossWeights())) == 0.0


def test_total_loss_linear():
    """Scaling weights scales the loss; one weight touches one term."""
    with ad.precision(np.float64):
        dicObs = {'gen': ad.as_tensor(0.3), 'object': ad.as_tensor(1.7)}
        lstAnt = [{'ant': ad.as_tensor(0.4), 'boxes': ad.as_tensor(2.2),
                   'recon': None},
                  {'ant': ad.as_tensor(0.9), 'boxes': ad.as_tensor(0.1),
                   'recon': ad.as_tensor(0.5)}]
        lstLmb = [1.0, 1.0, 2.0, 2.0, 2.0]
        varBase = _val(hl.total_loss(dicObs, lstAnt, lstLmb))
        varScl = _val(hl.total_loss(dicObs, lstAnt,
                                    [2.5 * varTmp for varTmp in lstLmb]))
        varAnt = _val(hl.total_loss(dicObs, lstAnt,
                                    [1.0, 1.0, 4.0, 2.0, 2.0]))
    assert varBase == pytest.approx(0.3 + 1.7 + 2.0 * (1.3 + 2.3 + 0.5))
    assert varScl == pytest.approx(2.5 * varBase)
    assert varAnt - varBase == pytest.approx(2.0 * 1.3)


@pytest.mark.parametrize('lstLmb', [[1.0, 1.0, 2.0, 2.0],
                                    [1.0, -1.0, 2.0, 2.0, 2.0],
                                    [1.0, np.inf, 2.0, 2.0, 2.0]])
def test_invalid_weights(lstLmb):
    with pytest.raises(ConfigError):
        hl.LossWeights.from_list(lstLmb)


def test_default_weights():
    assert hl.LossWeights().as_list() == [1.0, 1.0, 2.0, 2.0, 2.0]
    assert loss_weights(small_cfg(strLossAblate='recon')).as_list() == \
        [1.0, 1.0, 2.0, 2.0, 0.0]
# *****************************************************************************


# *****************************************************************************
# *** Windows and decoding

@pytest.mark.parametrize('varNumFrm, varHrz, lstExp', [
    (4, 1, [3]),
    (8, 3, [3, 4, 5]),
    (5, 3, []),
    (3, 1, [])])
def test_window_starts(varNumFrm, varHrz, lstExp):
    assert hl.window_starts(varNumFrm, varHrz) == lstExp


def test_window_multiplicity():
    assert hl.window_multiplicity(8, 3).tolist() == [0, 0, 0, 1, 2, 3, 2, 1]


def test_decode_distributions():
    aryScr = np.array([[0.0, 0.0], [np.log(3.0), 0.0], [5.0, 1.0]])
    lstDst = hl.decode_distributions(aryScr, np.array([False, True, True]))
    assert [objDst.pair for objDst in lstDst] == [(0, 1), (0, 2)]
    assert lstDst[0].scores == pytest.approx((0.75, 0.25))
    lstDst = hl.decode_distributions(np.array([[0.2, 0.8]]), np.array([True]),
                                     lgcLgt=False)
    assert lstDst[0].scores == (0.2, 0.8)


def test_head_dimensions():
    cfg = small_cfg()
    dicPrm = create_params(cfg, 5, 4)
    objX = ad.as_tensor(np.zeros((3, 16)))
    assert hl.mlp_head(objX, dicPrm, 'head_gen').shape == (3, 4)
    assert hl.mlp_head(objX, dicPrm, 'head_ant').shape == (3, 4)
    assert hl.mlp_head(objX, dicPrm, 'head_box_sub').shape == (3, 4)
    assert hl.mlp_head(objX, dicPrm, 'head_box_obj').shape == (3, 4)
    assert hl.mlp_head(ad.as_tensor(np.zeros((3, 12))), dicPrm,
                       'head_obj').shape == (3, 5)
# *****************************************************************************


# *****************************************************************************
# *** Video objective

@pytest.mark.parametrize('strModel', lstModels)
def test_model_loss(strModel):
    """The objective of every model is finite and reaches the heads."""
    cfg = small_cfg(strModel=strModel)
    dicPrm = create_params(cfg, 5, 4)
    objVt = video_tensors(tplFrmRng=(7, 7))
    objLoss, dicTrm, tplAcc = model_loss(objVt, dicPrm, cfg,
                                         loss_weights(cfg), varSeed=1)

    assert objLoss.shape == ()
    assert np.isfinite(_val(objLoss))
    assert dicTrm['ant'] > 0.0
    assert dicTrm['object'] > 0.0
    assert 0 <= tplAcc[0] <= tplAcc[1]
    assert tplAcc[1] > 0
    if strModel == 'baseline_plus':
        assert dicTrm['gen'] == 0.0
        assert dicTrm['boxes'] == 0.0

    ad.backward(objLoss)
    assert np.any(dicPrm['head_ant.l2.w'].grad != 0.0)
    assert np.any(dicPrm['obj_cat_emb'].grad != 0.0)


def test_model_loss_gradient():
    """Gradient check of the full ODE objective on a short video."""
    with ad.precision(np.float64):
        cfg = small_cfg(strModel='scenesayer_ode', varStepSize=0.5,
                        strSolver='euler', varTrnHrz=1)
        dicPrm = create_params(cfg, 5, 4)
        objVt = video_tensors(tplFrmRng=(5, 5), tplPairRng=(1, 2))
        objLmb = loss_weights(cfg)

        def funcLoss():
            return model_loss(objVt, dicPrm, cfg, objLmb)[0]

        lstPrm = [dicPrm[strKey] for strKey in
                  ['ode_f.l1.w', 'head_box_sub.l2.b', 'pair.w1.w']]
        assert check_gradient(funcLoss, lstPrm, varStp=1e-6) < 1e-3
# *****************************************************************************
