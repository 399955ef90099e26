# -*- coding: utf-8 -*-
"""Recall@K and mean Recall@K of anticipated scene graphs."""

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

import numpy as np


def graph_triplets(objGraph, setCat=None):
    """
    Category-level triplets (subject category, predicate, object category).

    Parameters
    ----------
    objGraph : SceneGraph
        Ground-truth graph.
    setCat : set or None
        If given, triplets whose subject or object category is not in the set
        are dropped.
    """
    lstTrp = []
    for objTrp in objGraph.triplets:
        varSub = objGraph.objects[objTrp.subject_idx].category
        varObj = objGraph.objects[objTrp.object_idx].category
        if setCat is not None and (varSub not in setCat
                                   or varObj not in setCat):
            continue
        lstTrp.append((varSub, objTrp.predicate, varObj))
    return lstTrp


def ranked_triplets(objGraph):
    """
    Predicted triplets ordered by descending score.

    Ties keep the order of the graph's triplets.

    Returns
    -------
    lstRnk : list of tuple
        (subject category, predicate, object category, score).
    """
    lstRnk = []
    for objTrp in objGraph.triplets:
        lstRnk.append((objGraph.objects[objTrp.subject_idx].category,
                       objTrp.predicate,
                       objGraph.objects[objTrp.object_idx].category,
                       float(objTrp.score)))
    return sorted(lstRnk, key=lambda tplTrp: -tplTrp[3])


def frame_hits(lstGt, lstRnk, varK):
    """
    Ground-truth triplets found among the top-k predictions.

    Returns
    -------
    lgcHit : list of bool
        One entry per ground-truth triplet.
    """
    setTop = set(tplTrp[:3] for tplTrp in lstRnk[:int(varK)])
    return [tuple(tplGt) in setTop for tplGt in lstGt]


def recall_at_k(lstGt, lstRnk, varK):
    """
    Recall of one frame.

    Parameters
    ----------
    lstGt : list of tuple
        Ground-truth triplets (subject category, predicate, object category).
    lstRnk : list of tuple
        Predictions sorted by descending score; entries start with the
        triplet (the score may follow).
    varK : int
        Number of top predictions considered (all if fewer).

    Returns
    -------
    varRcl : float or None
        Fraction of ground-truth triplets in the top-k; None for an empty
        ground truth (frame is skipped).
    """
    if len(lstGt) == 0:
        return None
    return float(np.mean(frame_hits(lstGt, lstRnk, varK)))


class RecallAccumulator(object):
    """
    Frame-level recalls of a split, per video and per predicate class.

    Recall is averaged over the frames of a video, then over videos. The
    recall of a predicate class is averaged over the frames in which the
    class occurs; mean recall averages over classes that occur.
    """

    def __init__(self, varNumPrd):
        self.varNumPrd = varNumPrd
        self.lstVidRcl = []
        self.lstClsRcl = [[] for _ in range(varNumPrd)]
        self._lstFrm = None

    def begin_video(self):
        self._lstFrm = []

    def add_frame(self, lstGt, lstRnk, varK):
        """Add one frame; frames without ground truth are skipped."""
        if len(lstGt) == 0:
            return
        lstHit = frame_hits(lstGt, lstRnk, varK)
        self._lstFrm.append(float(np.mean(lstHit)))
        vecPrd = np.array([tplGt[1] for tplGt in lstGt])
        vecHit = np.array(lstHit, dtype=np.float64)
        for varPrd in np.unique(vecPrd):
            self.lstClsRcl[varPrd].append(
                float(np.mean(vecHit[vecPrd == varPrd])))

    def end_video(self):
        """Close a video; videos without evaluated frames are not counted."""
        if len(self._lstFrm) > 0:
            self.lstVidRcl.append(float(np.mean(self._lstFrm)))
        self._lstFrm = None

    def merge(self, objOther):
        """Append the results of another accumulator (associative)."""
        self.lstVidRcl += objOther.lstVidRcl
        for idxPrd in range(self.varNumPrd):
            self.lstClsRcl[idxPrd] += objOther.lstClsRcl[idxPrd]

    @property
    def num_videos(self):
        return len(self.lstVidRcl)

    def result(self):
        """
        Aggregate the recalls.

        Returns
        -------
        varRcl : float
            Recall (NaN if nothing was evaluated).
        varMeanRcl : float
            Mean recall over classes that occur (NaN if none).
        vecCls : np.array
            Recall per predicate class, NaN for classes that never occur.
        """
        varRcl = (float(np.mean(self.lstVidRcl)) if self.lstVidRcl
                  else float('nan'))
        vecCls = np.array([np.mean(lstTmp) if lstTmp else np.nan
                           for lstTmp in self.lstClsRcl], dtype=np.float64)
        vecLgc = ~np.isnan(vecCls)
        varMeanRcl = (float(np.mean(vecCls[vecLgc])) if np.any(vecLgc)
                      else float('nan'))
        return varRcl, varMeanRcl, vecCls


def mean_recall_at_k(lstFrm, varK, varNumPrd):
    """
    Mean recall over the frames of a split.

    Parameters
    ----------
    lstFrm : list of tuple
        (ground-truth triplets, ranked predictions) per frame.
    varK : int
        Number of top predictions considered.
    varNumPrd : int
        Number of predicate classes.

    Returns
    -------
    varMeanRcl : float
        Mean over predicate classes with at least one ground-truth instance.
    vecCls : np.array
        Recall per class (NaN for absent classes).
    """
    objAcc = RecallAccumulator(varNumPrd)
    objAcc.begin_video()
    for lstGt, lstRnk in lstFrm:
        objAcc.add_frame(lstGt, lstRnk, varK)
    objAcc.end_video()
    _, varMeanRcl, vecCls = objAcc.result()
    return varMeanRcl, vecCls
