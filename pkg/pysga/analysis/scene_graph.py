# -*- coding: utf-8 -*-
"""Symbolic scene graph data model, corpus I/O and graph building."""

# Part of pysga library
#
# This program is free software: you can redistribute it and/or modify it under
# the terms of the GNU General Public License as published by the Free Software
# Foundation, either version 3 of the License, or (at your option) any later
# version.
#
# This program is distributed in the hope that it will be useful, but WITHOUT
# ANY WARRANTY; without even the implied warranty of MERCHANTABILITY or FITNESS
# FOR A PARTICULAR PURPOSE.  See the GNU General Public License for more
# details.
#
# You should have received a copy of the GNU General Public License along with
# this program.  If not, see <http://www.gnu.org/licenses/>.

import json
from dataclasses import dataclass
from typing import Optional, Tuple
import numpy as np

from pysga.analysis.utilities import (CorpusError, ContractError, ConfigError,
                                      write_atomic)


# Minimum number of annotated frames per video:
varMinFrm = 3


@dataclass(frozen=True)
class ObjectInstance:
    """Object with category id and normalised box (x1, y1, x2, y2)."""

    category: int
    bbox: Tuple[float, float, float, float]


@dataclass(frozen=True)
class RelationshipTriplet:
    """Subject / predicate / object triplet with frame-local indices."""

    subject_idx: int
    object_idx: int
    predicate: int
    score: Optional[float] = None


@dataclass(frozen=True)
class SceneGraph:
    """Objects and relationship triplets of one frame."""

    frame_index: int
    objects: Tuple[ObjectInstance, ...]
    triplets: Tuple[RelationshipTriplet, ...]


@dataclass(frozen=True)
class Taxonomy:
    """Object and predicate class names of a corpus."""

    object_classes: Tuple[str, ...]
    predicate_classes: Tuple[str, ...]

    @property
    def num_classes(self):
        return len(self.object_classes)

    @property
    def num_predicates(self):
        return len(self.predicate_classes)


@dataclass(frozen=True)
class VideoAnnotation:
    """Ordered scene graphs of one video."""

    video_id: str
    frames: Tuple[SceneGraph, ...]
    taxonomy: Taxonomy


@dataclass(frozen=True)
class PredicateDistribution:
    """Predicate scores of one ordered object pair."""

    pair: Tuple[int, int]
    scores: Tuple[float, ...]

    def normalized(self):
        """Return the scores rescaled to sum to one (numpy array)."""
        vecScr = np.asarray(self.scores, dtype=np.float64)
        varSum = np.sum(vecScr)
        if not varSum > 0.0:
            raise ContractError('Scores of pair ' + str(self.pair)
                                + ' do not sum to a positive value.')
        return vecScr / varSum


# *****************************************************************************
# *** Validation

def validate_graph(objGraph, objTax, strCtx):
    """
    Check the index invariants of one scene graph.

    Parameters
    ----------
    objGraph : SceneGraph
        Graph to check.
    objTax : Taxonomy
        Class names of the corpus.
    strCtx : str
        Context for error messages (e.g. video id).

    Raises
    ------
    CorpusError
        If a category, box, or triplet index is invalid.
    """
    strCtx = strCtx + ', frame ' + str(objGraph.frame_index)
    varNumObj = len(objGraph.objects)
    for idxObj, objObj in enumerate(objGraph.objects):
        if not (0 <= objObj.category < objTax.num_classes):
            raise CorpusError(strCtx + ', object ' + str(idxObj)
                              + ': category ' + str(objObj.category)
                              + ' out of range')
        if len(objObj.bbox) != 4:
            raise CorpusError(strCtx + ', object ' + str(idxObj)
                              + ': bbox needs 4 values')
        varX1, varY1, varX2, varY2 = objObj.bbox
        if not (0.0 <= varX1 <= varX2 <= 1.0 and 0.0 <= varY1 <= varY2 <= 1.0):
            raise CorpusError(strCtx + ', object ' + str(idxObj)
                              + ': invalid bbox ' + str(objObj.bbox))
    for idxTrp, objTrp in enumerate(objGraph.triplets):
        for varIdx in (objTrp.subject_idx, objTrp.object_idx):
            if not (0 <= varIdx < varNumObj):
                raise CorpusError(strCtx + ', relationship ' + str(idxTrp)
                                  + ': object index ' + str(varIdx)
                                  + ' does not exist')
        if objTrp.subject_idx == objTrp.object_idx:
            raise CorpusError(strCtx + ', relationship ' + str(idxTrp)
                              + ': subject equals object')
        if not (0 <= objTrp.predicate < objTax.num_predicates):
            raise CorpusError(strCtx + ', relationship ' + str(idxTrp)
                              + ': predicate ' + str(objTrp.predicate)
                              + ' out of range')


def validate_video(objVid):
    """Check frame ordering and the index invariants of every frame."""
    strCtx = 'video ' + str(objVid.video_id)
    for idxFrm in range(1, len(objVid.frames)):
        if (objVid.frames[idxFrm].frame_index
                <= objVid.frames[idxFrm - 1].frame_index):
            raise CorpusError(strCtx + ': frames not strictly ordered at '
                              + 'frame ' + str(objVid.frames[idxFrm]
                                               .frame_index))
    for objGraph in objVid.frames:
        validate_graph(objGraph, objVid.taxonomy, strCtx)


def check_video_lengths(lstVid, varMaxFrm):
    """
    Check that every video fits the positional tables of a model.

    Parameters
    ----------
    lstVid : list of VideoAnnotation
        Corpus.
    varMaxFrm : int
        Number of rows of the positional tables (`varMaxFrm` of the model).

    Raises
    ------
    ConfigError
        Naming the first video that is longer than `varMaxFrm` frames.
    """
    for objVid in lstVid:
        if len(objVid.frames) > varMaxFrm:
            raise ConfigError('Parameter varMaxFrm: video '
                              + str(objVid.video_id) + ' has '
                              + str(len(objVid.frames)) + ' frames, the '
                              + 'model supports at most ' + str(varMaxFrm))
# *****************************************************************************


# *****************************************************************************
# *** Corpus I/O

def _field(dicIn, strKey, strCtx):
    """Get a required field or raise a corpus error naming it."""
    if not isinstance(dicIn, dict) or strKey not in dicIn:
        raise CorpusError(strCtx + ': missing field "' + strKey + '"')
    return dicIn[strKey]


def _list_field(dicIn, strKey, strCtx):
    """Get a required list field."""
    lstOut = _field(dicIn, strKey, strCtx)
    if not isinstance(lstOut, list):
        raise CorpusError(strCtx + ': field "' + strKey
                          + '" is not a list')
    return lstOut


def _parse_video(dicVid, objTax, idxVid):
    """Convert one JSON video record into a `VideoAnnotation`."""
    strCtx = 'videos[' + str(idxVid) + ']'
    strId = str(_field(dicVid, 'id', strCtx))
    strCtx = 'video ' + strId
    lstFrm = []
    for idxFrm, dicFrm in enumerate(_list_field(dicVid, 'frames', strCtx)):
        strCtxFrm = strCtx + ', frames[' + str(idxFrm) + ']'
        try:
            tplObj = tuple(
                ObjectInstance(category=int(_field(dicObj, 'category',
                                                   strCtxFrm)),
                               bbox=tuple(float(varX) for varX in
                                          _field(dicObj, 'bbox', strCtxFrm)))
                for dicObj in _list_field(dicFrm, 'objects', strCtxFrm))
            tplTrp = tuple(
                RelationshipTriplet(
                    subject_idx=int(_field(dicRel, 'subject', strCtxFrm)),
                    object_idx=int(_field(dicRel, 'object', strCtxFrm)),
                    predicate=int(_field(dicRel, 'predicate', strCtxFrm)))
                for dicRel in _list_field(dicFrm, 'relationships', strCtxFrm))
            varFrmIdx = int(_field(dicFrm, 'frame', strCtxFrm))
        except (TypeError, ValueError) as objErr:
            raise CorpusError(strCtxFrm + ': ' + str(objErr))
        lstFrm.append(SceneGraph(frame_index=varFrmIdx, objects=tplObj,
                                 triplets=tplTrp))
    return VideoAnnotation(video_id=strId, frames=tuple(lstFrm),
                           taxonomy=objTax)


def corpus_from_dict(dicCrp):
    """
    Convert a parsed annotation document into videos.

    Parameters
    ----------
    dicCrp : dict
        Parsed JSON document (see `load_corpus`).

    Returns
    -------
    lstVid : list of VideoAnnotation
        Videos with at least three frames, sorted by video id.
    """
    objTax = Taxonomy(
        object_classes=tuple(
            str(strTmp) for strTmp in
            _list_field(dicCrp, 'object_classes', 'corpus')),
        predicate_classes=tuple(
            str(strTmp) for strTmp in
            _list_field(dicCrp, 'predicate_classes', 'corpus')))
    lstVid = []
    for idxVid, dicVid in enumerate(_list_field(dicCrp, 'videos', 'corpus')):
        objVid = _parse_video(dicVid, objTax, idxVid)
        validate_video(objVid)
        if len(objVid.frames) >= varMinFrm:
            lstVid.append(objVid)
    lstVid.sort(key=lambda objVid: objVid.video_id)
    return lstVid


def load_corpus(strPath):
    """
    Load an annotation corpus from a JSON file.

    Parameters
    ----------
    strPath : str
        Path of the UTF-8 JSON document with keys `object_classes`,
        `predicate_classes` and `videos`.

    Returns
    -------
    lstVid : list of VideoAnnotation
        Videos with at least three annotated frames, sorted by video id.

    Raises
    ------
    CorpusError
        If the file cannot be parsed (with line and column) or an index
        invariant is violated (naming video and frame).
    """
    try:
        with open(strPath, 'r', encoding='utf-8') as fleCrp:
            strTxt = fleCrp.read()
    except UnicodeDecodeError as objErr:
        raise CorpusError('Cannot decode ' + str(strPath)
                          + ' as UTF-8 at byte ' + str(objErr.start))
    try:
        dicCrp = json.loads(strTxt)
    except json.JSONDecodeError as objErr:
        raise CorpusError('Cannot parse ' + str(strPath) + ' at line '
                          + str(objErr.lineno) + ', column '
                          + str(objErr.colno) + ': ' + objErr.msg)
    return corpus_from_dict(dicCrp)


def corpus_to_dict(lstVid, objTax=None):
    """Convert videos into the annotation document structure."""
    if objTax is None:
        if len(lstVid) == 0:
            raise ContractError('Taxonomy needed to serialise empty corpus.')
        objTax = lstVid[0].taxonomy
    lstVidOut = []
    for objVid in lstVid:
        lstFrm = []
        for objGraph in objVid.frames:
            lstFrm.append({
                'frame': int(objGraph.frame_index),
                'objects': [{'category': int(objObj.category),
                             'bbox': [float(varX) for varX in objObj.bbox]}
                            for objObj in objGraph.objects],
                'relationships': [{'subject': int(objTrp.subject_idx),
                                   'object': int(objTrp.object_idx),
                                   'predicate': int(objTrp.predicate)}
                                  for objTrp in objGraph.triplets]})
        lstVidOut.append({'id': objVid.video_id, 'frames': lstFrm})
    return {'object_classes': list(objTax.object_classes),
            'predicate_classes': list(objTax.predicate_classes),
            'videos': lstVidOut}


def save_corpus(lstVid, strPath, objTax=None, dicExtra=None):
    """
    Write videos as an annotation JSON document.

    Parameters
    ----------
    lstVid : list of VideoAnnotation
        Videos to write.
    strPath : str
        Output path (written atomically).
    objTax : Taxonomy or None
        Taxonomy (default: taxonomy of the first video).
    dicExtra : dict or None
        Additional top-level entries (e.g. generating transition matrix),
        ignored by `load_corpus`.

    Notes
    -----
    Keys are sorted, so identical corpora give byte-identical files.
    """
    dicCrp = corpus_to_dict(lstVid, objTax=objTax)
    if dicExtra is not None:
        dicCrp.update(dicExtra)
    strJsn = json.dumps(dicCrp, sort_keys=True, indent=1)
    write_atomic(strPath, (strJsn + '\n').encode('utf-8'))
# *****************************************************************************


# *****************************************************************************
# *** Graph building strategies

def _check_dists(lstDst, lstObj):
    """Check pair indices and uniqueness of predicate distributions."""
    setPair = set()
    for objDst in lstDst:
        varSub, varObj = objDst.pair
        if not (0 <= varSub < len(lstObj) and 0 <= varObj < len(lstObj)):
            raise ContractError('Pair ' + str(objDst.pair)
                                + ' references a missing object.')
        if varSub == varObj:
            raise ContractError('Pair ' + str(objDst.pair)
                                + ' has subject equal to object.')
        if objDst.pair in setPair:
            raise ContractError('Pair ' + str(objDst.pair)
                                + ' appears more than once.')
        setPair.add(objDst.pair)


def build_graph_with_constraint(lstDst, lstObj, varFrmIdx=0):
    """
    Build a scene graph with one predicate per object pair.

    Parameters
    ----------
    lstDst : list of PredicateDistribution
        Scores, at most one entry per ordered pair.
    lstObj : list of ObjectInstance
        Objects of the frame.
    varFrmIdx : int
        Frame index of the resulting graph.

    Returns
    -------
    objGraph : SceneGraph
        One triplet per pair (in input order) with the argmax predicate (lowest
        id on ties) and its score.
    """
    _check_dists(lstDst, lstObj)
    lstTrp = []
    for objDst in lstDst:
        # np.argmax returns the first maximum, i.e. lowest predicate id:
        varPrd = int(np.argmax(objDst.scores))
        lstTrp.append(RelationshipTriplet(subject_idx=objDst.pair[0],
                                          object_idx=objDst.pair[1],
                                          predicate=varPrd,
                                          score=float(objDst.scores[varPrd])))
    return SceneGraph(frame_index=varFrmIdx, objects=tuple(lstObj),
                      triplets=tuple(lstTrp))


def build_graph_no_constraint(lstDst, lstObj, k_cap=None, varFrmIdx=0):
    """
    Build a scene graph with every predicate of every pair.

    Parameters
    ----------
    lstDst : list of PredicateDistribution
        Scores, at most one entry per ordered pair.
    lstObj : list of ObjectInstance
        Objects of the frame.
    k_cap : int or None
        Keep only the `k_cap` highest-scoring triplets.
    varFrmIdx : int
        Frame index of the resulting graph.

    Returns
    -------
    objGraph : SceneGraph
        Triplets sorted by score (descending); ties are ordered by pair
        position in `lstDst`, then by predicate id.
    """
    _check_dists(lstDst, lstObj)
    lstCnd = []
    for idxPair, objDst in enumerate(lstDst):
        for idxPrd, varScr in enumerate(objDst.scores):
            lstCnd.append((-float(varScr), idxPair, idxPrd))
    lstCnd.sort()
    if k_cap is not None:
        lstCnd = lstCnd[:int(k_cap)]
    lstTrp = [RelationshipTriplet(subject_idx=lstDst[idxPair].pair[0],
                                  object_idx=lstDst[idxPair].pair[1],
                                  predicate=idxPrd,
                                  score=-varNegScr)
              for varNegScr, idxPair, idxPrd in lstCnd]
    return SceneGraph(frame_index=varFrmIdx, objects=tuple(lstObj),
                      triplets=tuple(lstTrp))
# *****************************************************************************
