"""Test video arrays, attention encoders and relationship representations."""

from dataclasses import replace
import numpy as np
import pytest

from pysga.analysis import autodiff as ad
from pysga.analysis import encoders as enc
from pysga.analysis import scene_graph as sg
from pysga.analysis.model_creation import create_params, model_dims
from pysga.analysis.utilities import TrackingError, ContractError
from pysga.analysis.testing.gradcheck import check_gradient
from pysga.analysis.testing.helpers import (small_cfg, synthetic_videos,
                                            video_tensors)


def _params(cfg, varNumCls=5, varNumPrd=4):
    return create_params(cfg, varNumCls, varNumPrd)


def _video(lstFrm, varNumCls=4, varNumPrd=3):
    """Video from lists of (objects, triplets) per frame."""
    objTax = sg.Taxonomy(
        object_classes=tuple('c' + str(idx) for idx in range(varNumCls)),
        predicate_classes=tuple('p' + str(idx) for idx in range(varNumPrd)))
    return sg.VideoAnnotation(
        video_id='v',
        frames=tuple(sg.SceneGraph(frame_index=idxFrm,
                                   objects=tuple(sg.ObjectInstance(
                                       category=varCat, bbox=tplBox)
                                       for varCat, tplBox in lstObj),
                                   triplets=tuple(
                                       sg.RelationshipTriplet(*tplTrp)
                                       for tplTrp in lstTrp))
                     for idxFrm, (lstObj, lstTrp) in enumerate(lstFrm)),
        taxonomy=objTax)


tplBx01 = (0.1, 0.1, 0.3, 0.3)
tplBx02 = (0.5, 0.5, 0.7, 0.9)
tplBx03 = (0.2, 0.6, 0.4, 0.8)


def test_prepare_video():
    """Tracks by category, actor first, pairs relate actor and objects."""
    # -------------------------------------------------------------------------
    # *** Preparations

    # Frame 1 lacks object 3; objects are listed in varying order; the
    # relationship between the two objects is not modelled.
    objVid = _video([
        ([(2, tplBx02), (0, tplBx01), (3, tplBx03)],
         [(1, 0, 2), (1, 2, 0), (0, 2, 1)]),
        ([(0, tplBx01), (2, tplBx02)], [(0, 1, 1)]),
        ([(3, tplBx03), (0, tplBx01)], [])])

    # -------------------------------------------------------------------------
    # *** Convert

    objVt = enc.prepare_video(objVid)

    # -------------------------------------------------------------------------
    # *** Compare

    assert objVt.num_frames == 3
    assert objVt.num_pairs == 2
    assert list(objVt.vecTrkCat) == [0, 2, 3]
    assert objVt.aryPrsObj.tolist() == [[True, True, True],
                                        [True, True, False],
                                        [True, False, True]]
    assert objVt.aryLoc.tolist() == [[1, 0, 2], [0, 1, -1], [1, -1, 0]]
    assert objVt.aryPrsPair.tolist() == [[True, True], [True, False],
                                         [False, True]]
    assert list(objVt.vecNumObj) == [3, 2, 2]
    np.testing.assert_allclose(objVt.aryBox[0, 1], tplBx02)
    np.testing.assert_allclose(objVt.aryBox[1, 2], 0.0)

    # Labels: frame 0 pair 0 holds predicate 2, pair 1 predicate 0:
    assert np.flatnonzero(objVt.aryPos[0, 0]).tolist() == [2]
    assert np.flatnonzero(objVt.aryPos[0, 1]).tolist() == [0]
    assert np.flatnonzero(objVt.aryPos[1, 0]).tolist() == [1]
    assert not np.any(objVt.aryPos[2])

    # Union box of actor and object 2 at frame 0:
    np.testing.assert_allclose(objVt.aryGeoUni[0, 0, :4],
                               [0.1, 0.1, 0.7, 0.9])
    np.testing.assert_allclose(objVt.aryGeoUni[1, 1], 0.0)


def test_box_geometry():
    aryGeo = enc.box_geometry(np.array([0.2, 0.4, 0.6, 0.5]))
    np.testing.assert_allclose(aryGeo, [0.2, 0.4, 0.6, 0.5, 0.4, 0.1, 0.4,
                                        0.45])


def test_duplicate_category():
    objVid = _video([([(0, tplBx01), (2, tplBx02), (2, tplBx03)], [])] * 3)
    with pytest.raises(TrackingError, match='duplicate'):
        enc.prepare_video(objVid)


def test_missing_actor():
    objVid = _video([([(1, tplBx01), (2, tplBx02)], [])] * 3)
    with pytest.raises(TrackingError,
                       match='video v: actor category 0 never occurs'):
        enc.prepare_video(objVid)


def test_encode_video_shapes():
    """Object, spatial and temporal encodings have the documented shapes."""
    cfg = small_cfg()
    dicPrm = _params(cfg)
    objVt = video_tensors(tplPairRng=(2, 3))
    varDimObj, varDimRel = model_dims(cfg)
    assert varDimRel == 3 * 4 + 2 * 2

    dicEnc = enc.encode_video(objVt, dicPrm)
    varT, varP = objVt.num_frames, objVt.num_pairs
    assert dicEnc['obj'].shape == (varT, varP + 1, varDimObj)
    assert dicEnc['spa'].shape == (varT, varP, varDimRel)
    assert dicEnc['tmp'].shape == (varP, varT, varDimRel)

    # Without temporal encoding:
    dicEnc = enc.encode_video(objVt, dicPrm, lgcTmp=False)
    assert dicEnc['tmp'] is None


def test_no_pairs():
    """A video with the actor only has no relationship encodings."""
    objVid = _video([([(0, tplBx01)], [])] * 3)
    objVt = enc.prepare_video(objVid)
    cfg = small_cfg()
    dicEnc = enc.encode_video(objVt, _params(cfg, varNumCls=4, varNumPrd=3))
    assert objVt.num_pairs == 0
    assert dicEnc['spa'] is None
    assert dicEnc['tmp'] is None


def test_identical_frames():
    """Identical frames give identical object encodings."""
    cfg = small_cfg()
    dicPrm = _params(cfg, varNumCls=4, varNumPrd=3)
    objVid = _video([([(0, tplBx01), (1, tplBx02)], [(0, 1, 2)])] * 4)
    objV = enc.encode_objects(enc.prepare_video(objVid), dicPrm)
    for idxFrm in range(1, 4):
        np.testing.assert_allclose(objV.data[idxFrm], objV.data[0],
                                   rtol=1e-5, atol=1e-6)


def test_zero_projections():
    """Zero projection weights leave only the semantic embeddings."""
    cfg = small_cfg()
    dicPrm = _params(cfg)
    for strKey in ('pair.w1.w', 'pair.w2.w', 'pair.w3.w'):
        dicPrm[strKey].data[...] = 0.0
    objVt = video_tensors()
    objZ = enc.build_pair_representations(
        objVt, enc.encode_objects(objVt, dicPrm), dicPrm)

    assert objZ.shape == (objVt.num_frames, objVt.num_pairs, 3 * 4 + 2 * 2)
    np.testing.assert_array_equal(objZ.data[..., :12], 0.0)
    aryEmb = dicPrm['sem_emb'].data
    np.testing.assert_allclose(objZ.data[0, 0, 12:14],
                               aryEmb[objVt.vecTrkCat[0]])
    np.testing.assert_allclose(objZ.data[0, -1, 14:],
                               aryEmb[objVt.vecTrkCat[-1]])


def test_spatial_permutation_equivariance():
    """Permuting the pairs of a frame permutes the spatial encodings."""
    cfg = small_cfg()
    dicPrm = _params(cfg)
    objRng = np.random.default_rng(4)
    aryZ = objRng.normal(size=(2, 5, 16))
    aryPrs = np.ones((2, 5), dtype=bool)
    vecPrm = np.array([3, 0, 4, 1, 2])

    objOut = enc.spatial_encode(ad.as_tensor(aryZ), aryPrs, dicPrm)
    objPrm = enc.spatial_encode(ad.as_tensor(aryZ[:, vecPrm]), aryPrs, dicPrm)
    np.testing.assert_allclose(objPrm.data, objOut.data[:, vecPrm],
                               rtol=1e-5, atol=1e-5)


def test_absent_pairs_ignored():
    """Absent pairs do not influence present ones."""
    cfg = small_cfg()
    dicPrm = _params(cfg)
    objRng = np.random.default_rng(5)
    aryZ = objRng.normal(size=(1, 3, 16))
    aryPrs = np.array([[True, False, True]])
    objOut01 = enc.spatial_encode(ad.as_tensor(aryZ), aryPrs, dicPrm)
    aryZ[0, 1] += 10.0
    objOut02 = enc.spatial_encode(ad.as_tensor(aryZ), aryPrs, dicPrm)
    np.testing.assert_allclose(objOut02.data[0, [0, 2]],
                               objOut01.data[0, [0, 2]], rtol=1e-5,
                               atol=1e-5)


def test_causality():
    """Changing frame t leaves the encodings of earlier frames unchanged."""
    # -------------------------------------------------------------------------
    # *** Preparations

    cfg = small_cfg()
    dicPrm = _params(cfg)
    objVt = video_tensors(tplFrmRng=(7, 7))
    varFrm = 4

    # Move every box of frame 4:
    aryBox = objVt.aryBox.copy()
    aryBox[varFrm] = np.clip(aryBox[varFrm] + 0.05, 0.0, 1.0)
    objVtMod = replace(objVt, aryBox=aryBox,
                       aryGeo=enc.box_geometry(aryBox)
                       * objVt.aryPrsObj[..., None])

    # -------------------------------------------------------------------------
    # *** Encode

    dicEnc01 = enc.encode_video(objVt, dicPrm)
    dicEnc02 = enc.encode_video(objVtMod, dicPrm)

    # -------------------------------------------------------------------------
    # *** Compare

    np.testing.assert_allclose(dicEnc02['tmp'].data[:, :varFrm],
                               dicEnc01['tmp'].data[:, :varFrm], rtol=1e-5,
                               atol=1e-6)
    np.testing.assert_allclose(dicEnc02['obj'].data[:varFrm],
                               dicEnc01['obj'].data[:varFrm], rtol=1e-5,
                               atol=1e-6)
    assert not np.allclose(dicEnc02['tmp'].data[:, varFrm:],
                           dicEnc01['tmp'].data[:, varFrm:])


def test_empty_history():
    cfg = small_cfg()
    dicPrm = _params(cfg)
    with pytest.raises(ContractError):
        enc.temporal_encode(ad.as_tensor(np.zeros((0, 2, 16))),
                            np.zeros((0, 2), dtype=bool), dicPrm)


def test_history_exceeds_positions():
    cfg = small_cfg(varMaxFrm=16)
    dicPrm = _params(cfg)
    with pytest.raises(ContractError, match='positional'):
        enc.temporal_encode(ad.as_tensor(np.zeros((17, 2, 16))),
                            np.ones((17, 2), dtype=bool), dicPrm)


def test_pipeline_gradient():
    """Gradients through the encoders agree with finite differences."""
    with ad.precision(np.float64):
        cfg = small_cfg()
        dicPrm = _params(cfg)
        objVt = enc.prepare_video(synthetic_videos(tplFrmRng=(4, 4),
                                                   tplPairRng=(2, 2))[0])
        aryWgt = np.random.default_rng(0).normal(
            size=(objVt.num_pairs, objVt.num_frames, 16))

        def funcLoss():
            dicEnc = enc.encode_video(objVt, dicPrm)
            return ad.reduce_sum(ad.mul(dicEnc['tmp'], aryWgt))

        lstPrm = [dicPrm[strKey] for strKey in
                  ['obj_cat_emb', 'obj_enc.0.wq.w', 'pair.w3.w', 'sem_emb',
                   'spa_enc.0.ffn1.w', 'tmp_enc.0.wk.w', 'tmp_pos']]
        assert check_gradient(funcLoss, lstPrm, varStp=1e-5) < 1e-3
