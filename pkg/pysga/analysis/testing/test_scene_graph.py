"""Test scene graph types, corpus loading and graph building strategies."""

import json
import numpy as np
import pytest
from hypothesis import given, settings, HealthCheck, strategies as st

from pysga.analysis import scene_graph as sg
from pysga.analysis.utilities import CorpusError, ContractError


def _frame(varFrm, lstPrd):
    """Frame with an actor and one object per predicate."""
    lstObj = [{'category': 0, 'bbox': [0.4, 0.4, 0.6, 0.6]}]
    lstRel = []
    for idxPrd, varPrd in enumerate(lstPrd):
        lstObj.append({'category': idxPrd + 1,
                       'bbox': [0.1, 0.1 * (idxPrd + 1), 0.2,
                                0.1 * (idxPrd + 1) + 0.05]})
        lstRel.append({'subject': 0, 'object': idxPrd + 1,
                       'predicate': varPrd})
    return {'frame': varFrm, 'objects': lstObj, 'relationships': lstRel}


def _document():
    """Annotation document: one short video and two usable ones."""
    return {'object_classes': ['person', 'cup', 'table'],
            'predicate_classes': ['holding', 'looking_at', 'touching'],
            'videos': [
                {'id': 'b', 'frames': [_frame(0, [0, 1]), _frame(2, [0, 2]),
                                       _frame(5, [1, 2])]},
                {'id': 'short', 'frames': [_frame(0, [0]), _frame(1, [1])]},
                {'id': 'a', 'frames': [_frame(3, [2]), _frame(4, [2]),
                                       _frame(7, [0])]}]}


def _write(tmp_path, dicCrp, strName='corpus.json'):
    strPath = str(tmp_path / strName)
    with open(strPath, 'w', encoding='utf-8') as fleOut:
        json.dump(dicCrp, fleOut)
    return strPath


def _objects(varNum):
    return [sg.ObjectInstance(category=idx, bbox=(0.0, 0.0, 0.1, 0.1))
            for idx in range(varNum)]


def test_load_corpus(tmp_path):
    """Load a corpus, drop short videos, and sort by video id."""
    # -------------------------------------------------------------------------
    # *** Preparations

    strPath = _write(tmp_path, _document())

    # -------------------------------------------------------------------------
    # *** Load

    lstVid = sg.load_corpus(strPath)

    # -------------------------------------------------------------------------
    # *** Compare

    assert [objVid.video_id for objVid in lstVid] == ['a', 'b']
    objVid = lstVid[1]
    assert [objGrp.frame_index for objGrp in objVid.frames] == [0, 2, 5]
    assert objVid.taxonomy.num_classes == 3
    assert objVid.taxonomy.num_predicates == 3
    objTrp = objVid.frames[1].triplets[1]
    assert (objTrp.subject_idx, objTrp.object_idx, objTrp.predicate) == \
        (0, 2, 2)
    assert objTrp.score is None
    assert objVid.frames[0].objects[1].bbox == pytest.approx(
        (0.1, 0.1, 0.2, 0.15))


def test_empty_file(tmp_path):
    """Unparseable files raise a corpus error with the position."""
    strPath = str(tmp_path / 'empty.json')
    open(strPath, 'w').close()
    with pytest.raises(CorpusError, match='line 1'):
        sg.load_corpus(strPath)


def test_missing_field(tmp_path):
    dicCrp = _document()
    del dicCrp['videos'][0]['frames'][1]['relationships']
    with pytest.raises(CorpusError, match='relationships'):
        sg.load_corpus(_write(tmp_path, dicCrp))


@pytest.mark.parametrize('strCase, strMsg', [
    ('object_index', 'does not exist'),
    ('category', 'category 9'),
    ('predicate', 'predicate 3'),
    ('bbox', 'invalid bbox'),
    ('order', 'not strictly ordered'),
    ('self', 'subject equals object')])
def test_invalid_corpus(tmp_path, strCase, strMsg):
    """Index invariant violations name the video and the frame."""
    dicCrp = _document()
    dicFrm = dicCrp['videos'][0]['frames'][1]
    if strCase == 'object_index':
        dicFrm['relationships'][0]['object'] = 7
    elif strCase == 'category':
        dicFrm['objects'][1]['category'] = 9
    elif strCase == 'predicate':
        dicFrm['relationships'][0]['predicate'] = 3
    elif strCase == 'bbox':
        dicFrm['objects'][1]['bbox'] = [0.5, 0.1, 0.2, 0.2]
    elif strCase == 'order':
        dicFrm['frame'] = 0
    else:
        dicFrm['relationships'][0]['object'] = 0

    with pytest.raises(CorpusError) as objExc:
        sg.load_corpus(_write(tmp_path, dicCrp))
    assert strMsg in str(objExc.value)
    assert 'video b' in str(objExc.value)
    if strCase != 'order':
        assert 'frame 2' in str(objExc.value)


@pytest.mark.parametrize('strCase, strMsg', [
    ('frames', 'video b: field "frames"'),
    ('objects', 'video b, frames[1]: field "objects"'),
    ('relationships', 'video b, frames[1]: field "relationships"'),
    ('videos', 'corpus: field "videos"'),
    ('object_classes', 'corpus: field "object_classes"')])
def test_invalid_field_type(tmp_path, strCase, strMsg):
    """Fields that must be lists are rejected with their context."""
    dicCrp = _document()
    if strCase == 'frames':
        dicCrp['videos'][0]['frames'] = 5
    elif strCase in ('objects', 'relationships'):
        dicCrp['videos'][0]['frames'][1][strCase] = 'none'
    else:
        dicCrp[strCase] = 7

    with pytest.raises(CorpusError, match='is not a list') as objExc:
        sg.load_corpus(_write(tmp_path, dicCrp))
    assert strMsg in str(objExc.value)


def test_invalid_encoding(tmp_path):
    strPath = str(tmp_path / 'latin.json')
    with open(strPath, 'wb') as fleOut:
        fleOut.write(b'\xff\xfe{')
    with pytest.raises(CorpusError, match='UTF-8 at byte 0'):
        sg.load_corpus(strPath)


def test_save_load_save(tmp_path):
    """Saving a loaded corpus reproduces the file byte for byte."""
    lstVid = sg.load_corpus(_write(tmp_path, _document()))
    strPth01 = str(tmp_path / 'out_01.json')
    strPth02 = str(tmp_path / 'out_02.json')
    sg.save_corpus(lstVid, strPth01)
    lstVid02 = sg.load_corpus(strPth01)
    sg.save_corpus(lstVid02, strPth02)

    assert lstVid02 == lstVid
    with open(strPth01, 'rb') as fle01, open(strPth02, 'rb') as fle02:
        assert fle01.read() == fle02.read()


def test_with_constraint():
    """One triplet per pair with the argmax predicate."""
    lstDst = [sg.PredicateDistribution(pair=(0, 1), scores=(0.1, 0.7, 0.2)),
              sg.PredicateDistribution(pair=(0, 2), scores=(0.2, 0.3, 0.5))]
    objGrp = sg.build_graph_with_constraint(lstDst, _objects(3), varFrmIdx=4)

    assert objGrp.frame_index == 4
    assert [(objTrp.subject_idx, objTrp.object_idx, objTrp.predicate)
            for objTrp in objGrp.triplets] == [(0, 1, 1), (0, 2, 2)]
    assert [objTrp.score for objTrp in objGrp.triplets] == [0.7, 0.5]


def test_with_constraint_tie():
    """Ties resolve to the lowest predicate id."""
    lstDst = [sg.PredicateDistribution(pair=(1, 0), scores=(0.1, 0.45, 0.45))]
    objGrp = sg.build_graph_with_constraint(lstDst, _objects(2))
    assert objGrp.triplets[0].predicate == 1


def test_no_constraint():
    """All predicates of all pairs, sorted by score."""
    lstDst = [sg.PredicateDistribution(pair=(0, 1), scores=(0.1, 0.6, 0.3)),
              sg.PredicateDistribution(pair=(0, 2), scores=(0.3, 0.5, 0.2))]
    objGrp = sg.build_graph_no_constraint(lstDst, _objects(3))

    assert len(objGrp.triplets) == 6
    assert [(objTrp.object_idx, objTrp.predicate)
            for objTrp in objGrp.triplets] == [(1, 1), (2, 1), (1, 2),
                                               (2, 0), (2, 2), (1, 0)]

    # Cap:
    objGrp = sg.build_graph_no_constraint(lstDst, _objects(3), k_cap=2)
    assert [objTrp.score for objTrp in objGrp.triplets] == [0.6, 0.5]


@pytest.mark.parametrize('tplPair', [(0, 0), (0, 5)])
def test_invalid_pair(tplPair):
    lstDst = [sg.PredicateDistribution(pair=tplPair, scores=(0.5, 0.5))]
    with pytest.raises(ContractError):
        sg.build_graph_with_constraint(lstDst, _objects(3))


def test_duplicate_pair():
    lstDst = [sg.PredicateDistribution(pair=(0, 1), scores=(0.5, 0.5)),
              sg.PredicateDistribution(pair=(0, 1), scores=(0.2, 0.8))]
    with pytest.raises(ContractError, match='more than once'):
        sg.build_graph_no_constraint(lstDst, _objects(2))


def test_normalized():
    """Scores are rescaled by their sum."""
    objDst = sg.PredicateDistribution(pair=(0, 1), scores=(0.5, 0.3, 0.2))
    np.testing.assert_allclose(objDst.normalized(), [0.5, 0.3, 0.2])
    objDst = sg.PredicateDistribution(pair=(0, 1), scores=(2.0, 1.0, 1.0))
    np.testing.assert_allclose(objDst.normalized(), [0.5, 0.25, 0.25])
    with pytest.raises(ContractError, match='positive'):
        sg.PredicateDistribution(pair=(0, 1), scores=(0.0, 0.0)).normalized()


@st.composite
def _distributions(draw):
    """Random predicate scores for distinct pairs (rounded, so ties occur)."""
    varNumObj = draw(st.integers(2, 4))
    varNumPrd = draw(st.integers(1, 5))
    lstPair = [(idxSub, idxObj) for idxSub in range(varNumObj)
               for idxObj in range(varNumObj) if idxSub != idxObj]
    lstPair = draw(st.lists(st.sampled_from(lstPair), min_size=1,
                            unique=True))
    lstDst = [sg.PredicateDistribution(
        pair=tplPair,
        scores=tuple(draw(st.lists(st.sampled_from([0.0, 0.1, 0.25, 0.5]),
                                   min_size=varNumPrd, max_size=varNumPrd))))
        for tplPair in lstPair]
    return lstDst, varNumObj


@settings(max_examples=200, deadline=None,
          suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(_distributions(), st.integers(0, 30))
def test_strategies_brute_force(tplCase, varCap):
    """Compare both strategies with brute-force enumeration."""
    lstDst, varNumObj = tplCase
    lstObj = _objects(varNumObj)

    objNo = sg.build_graph_no_constraint(lstDst, lstObj)
    objWth = sg.build_graph_with_constraint(lstDst, lstObj)

    # Brute force: stable sort of all triplets in enumeration order.
    lstAll = [(objDst.pair, idxPrd, varScr)
              for objDst in lstDst
              for idxPrd, varScr in enumerate(objDst.scores)]
    lstAll = sorted(lstAll, key=lambda tplTmp: -tplTmp[2])
    assert [((objTrp.subject_idx, objTrp.object_idx), objTrp.predicate,
             objTrp.score) for objTrp in objNo.triplets] == lstAll

    # Each with-constraint triplet is the first triplet of its pair in the
    # no-constraint ranking:
    dicFst = {}
    for objTrp in objNo.triplets:
        dicFst.setdefault((objTrp.subject_idx, objTrp.object_idx), objTrp)
    for objTrp in objWth.triplets:
        assert dicFst[(objTrp.subject_idx, objTrp.object_idx)] == objTrp

    # The capped graph is a prefix:
    objCap = sg.build_graph_no_constraint(lstDst, lstObj, k_cap=varCap)
    assert objCap.triplets == objNo.triplets[:varCap]
