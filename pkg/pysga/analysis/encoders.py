# -*- coding: utf-8 -*-
"""Object, pairwise, spatial and temporal relationship encoders."""

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

from dataclasses import dataclass
import numpy as np

from pysga.analysis import autodiff as ad
from pysga.analysis.utilities import TrackingError, ContractError


# Number of box geometry features (x1, y1, x2, y2, w, h, cx, cy):
varDimGeo = 8

# Additive attention mask for excluded keys:
varMskVal = -1e9


# *****************************************************************************
# *** Symbolic inputs as arrays

@dataclass
class VideoTensors:
    """
    Array view of one video, objects tracked by category.

    Track 0 is the actor; pair p relates the actor to track p + 1.

    Attributes
    ----------
    video_id : str
        Video identifier.
    vecTrkCat : np.array
        Category of each track, shape [K].
    aryPrsObj : np.array
        Track present in frame, shape [T, K] (bool).
    aryLoc : np.array
        Frame-local object index of each track (-1 if absent), shape [T, K].
    aryBox : np.array
        Boxes, shape [T, K, 4] (zero where absent).
    aryGeo : np.array
        Box geometry features, shape [T, K, 8].
    aryPrsPair : np.array
        Actor and object both present, shape [T, P] (bool).
    aryGeoUni : np.array
        Union box geometry of each pair, shape [T, P, 8].
    aryPos : np.array
        Multi-hot predicate labels of each pair, shape [T, P, |P|] (bool).
    vecNumObj : np.array
        Number of annotated objects per frame, shape [T].
    """

    video_id: str
    vecTrkCat: np.ndarray
    aryPrsObj: np.ndarray
    aryLoc: np.ndarray
    aryBox: np.ndarray
    aryGeo: np.ndarray
    aryPrsPair: np.ndarray
    aryGeoUni: np.ndarray
    aryPos: np.ndarray
    vecNumObj: np.ndarray

    @property
    def num_frames(self):
        return self.aryPrsObj.shape[0]

    @property
    def num_pairs(self):
        return self.aryPrsPair.shape[1]


def box_geometry(aryBox):
    """Expand boxes [..., 4] into geometry features [..., 8]."""
    aryBox = np.asarray(aryBox, dtype=np.float64)
    aryW = aryBox[..., 2] - aryBox[..., 0]
    aryH = aryBox[..., 3] - aryBox[..., 1]
    aryCx = 0.5 * (aryBox[..., 0] + aryBox[..., 2])
    aryCy = 0.5 * (aryBox[..., 1] + aryBox[..., 3])
    return np.concatenate([aryBox, np.stack([aryW, aryH, aryCx, aryCy],
                                            axis=-1)], axis=-1)


def union_box(aryBoxA, aryBoxB):
    """Smallest box containing both boxes, elementwise over [..., 4]."""
    return np.concatenate([np.minimum(aryBoxA[..., :2], aryBoxB[..., :2]),
                           np.maximum(aryBoxA[..., 2:], aryBoxB[..., 2:])],
                          axis=-1)


def prepare_video(objVid, varActorCat=0):
    """
    Convert an annotated video into track arrays.

    Parameters
    ----------
    objVid : VideoAnnotation
        Video with at least one frame.
    varActorCat : int
        Category id of the actor.

    Returns
    -------
    objVt : VideoTensors

    Raises
    ------
    TrackingError
        If a category occurs twice in one frame, or the actor never occurs.
    """
    varNumFrm = len(objVid.frames)
    varNumPrd = objVid.taxonomy.num_predicates

    setCat = set()
    for objGraph in objVid.frames:
        lstCat = [objObj.category for objObj in objGraph.objects]
        if len(set(lstCat)) != len(lstCat):
            raise TrackingError('video ' + str(objVid.video_id) + ', frame '
                                + str(objGraph.frame_index)
                                + ': duplicate object category, objects '
                                + 'cannot be tracked by category')
        setCat.update(lstCat)
    if varActorCat not in setCat:
        raise TrackingError('video ' + str(objVid.video_id)
                            + ': actor category ' + str(varActorCat)
                            + ' never occurs')

    # Actor first, other tracks by ascending category:
    vecTrkCat = np.array([varActorCat] + sorted(setCat - {varActorCat}),
                         dtype=np.int64)
    dicTrk = {varCat: idxTrk for idxTrk, varCat in enumerate(vecTrkCat)}
    varNumTrk = len(vecTrkCat)
    varNumPair = varNumTrk - 1

    aryPrsObj = np.zeros((varNumFrm, varNumTrk), dtype=bool)
    aryLoc = np.full((varNumFrm, varNumTrk), -1, dtype=np.int64)
    aryBox = np.zeros((varNumFrm, varNumTrk, 4))
    aryPos = np.zeros((varNumFrm, varNumPair, varNumPrd), dtype=bool)
    vecNumObj = np.zeros(varNumFrm, dtype=np.int64)

    for idxFrm, objGraph in enumerate(objVid.frames):
        vecNumObj[idxFrm] = len(objGraph.objects)
        for idxLoc, objObj in enumerate(objGraph.objects):
            idxTrk = dicTrk[objObj.category]
            aryPrsObj[idxFrm, idxTrk] = True
            aryLoc[idxFrm, idxTrk] = idxLoc
            aryBox[idxFrm, idxTrk, :] = objObj.bbox
        for objTrp in objGraph.triplets:
            varCatSub = objGraph.objects[objTrp.subject_idx].category
            varCatObj = objGraph.objects[objTrp.object_idx].category
            # Only actor-subject relationships are modelled:
            if varCatSub != varActorCat:
                continue
            aryPos[idxFrm, dicTrk[varCatObj] - 1, objTrp.predicate] = True

    aryPrsPair = aryPrsObj[:, :1] & aryPrsObj[:, 1:]
    aryGeoUni = box_geometry(union_box(aryBox[:, :1, :], aryBox[:, 1:, :]))
    aryGeoUni = aryGeoUni * aryPrsPair[..., None]

    return VideoTensors(video_id=objVid.video_id, vecTrkCat=vecTrkCat,
                        aryPrsObj=aryPrsObj, aryLoc=aryLoc, aryBox=aryBox,
                        aryGeo=box_geometry(aryBox) * aryPrsObj[..., None],
                        aryPrsPair=aryPrsPair, aryGeoUni=aryGeoUni,
                        aryPos=aryPos, vecNumObj=vecNumObj)
# *****************************************************************************


# *****************************************************************************
# *** Layers

def init_linear(dicPrm, strName, varIn, varOut, objRng, lgcBias=True,
                varGain=1.0):
    """
    Add a Glorot-uniform initialised linear map to a parameter dictionary.

    Creates `strName + '.w'` (shape [varIn, varOut]) and, if `lgcBias`,
    `strName + '.b'` (zeros, shape [varOut]).
    """
    varLim = varGain * np.sqrt(6.0 / (varIn + varOut))
    dicPrm[strName + '.w'] = ad.parameter(
        objRng.uniform(-varLim, varLim, size=(varIn, varOut)),
        strName + '.w')
    if lgcBias:
        dicPrm[strName + '.b'] = ad.parameter(np.zeros(varOut),
                                              strName + '.b')


def linear(objX, dicPrm, strName):
    """Apply the linear map `strName` to the last axis of `objX`."""
    objOut = ad.matmul(objX, dicPrm[strName + '.w'])
    if (strName + '.b') in dicPrm:
        objOut = ad.add(objOut, dicPrm[strName + '.b'])
    return objOut


def init_attention(dicPrm, strPfx, varDim, varDimFfn, objRng):
    """Add the projections and feed-forward maps of one attention layer."""
    for strPrj in ('wq', 'wk', 'wv', 'wo'):
        init_linear(dicPrm, strPfx + '.' + strPrj, varDim, varDim, objRng)
    init_linear(dicPrm, strPfx + '.ffn1', varDim, varDimFfn, objRng)
    init_linear(dicPrm, strPfx + '.ffn2', varDimFfn, varDim, objRng)


def init_encoder(dicPrm, strPfx, varDim, varDimFfn, varNumLyr, objRng):
    """Add `varNumLyr` attention layers named `strPfx.<layer>`."""
    for idxLyr in range(varNumLyr):
        init_attention(dicPrm, strPfx + '.' + str(idxLyr), varDim, varDimFfn,
                       objRng)


def causal_mask(varLen):
    """Lower triangular boolean mask, shape [L, L]."""
    return np.tril(np.ones((varLen, varLen), dtype=bool))


def key_mask(aryPrs):
    """
    Mask that admits present keys and the query position itself.

    Parameters
    ----------
    aryPrs : np.array
        Presence of keys, shape [B, L] (bool).

    Returns
    -------
    aryMsk : np.array
        Shape [B, L, L], `aryMsk[b, i, j]` true if query i may attend key j.
    """
    varLen = aryPrs.shape[1]
    return aryPrs[:, None, :] | np.eye(varLen, dtype=bool)[None, :, :]


def attention_layer(objX, aryMsk, dicPrm, strPfx, varNumHead=1,
                    lgcRetWgt=False):
    """
    Scaled dot-product self-attention with residual and feed-forward block.

    Parameters
    ----------
    objX : Tensor
        Input sequences, shape [B, L, d] (Q = K = V = objX).
    aryMsk : np.array
        Admissible (query, key) positions, shape [B, L, L] (bool).
    dicPrm : dict
        Parameters; uses `strPfx.wq/wk/wv/wo/ffn1/ffn2`.
    strPfx : str
        Parameter name prefix of the layer.
    varNumHead : int
        Number of attention heads (must divide d).
    lgcRetWgt : bool
        Whether to also return the attention weights.

    Returns
    -------
    objOut : Tensor
        Shape [B, L, d].
    objWgt : Tensor
        Attention weights, shape [B, heads, L, L] (only if `lgcRetWgt`).
    """
    varBat, varLen, varDim = objX.shape
    assert varDim % varNumHead == 0, 'Heads must divide the model dimension.'
    varDimHd = varDim // varNumHead

    def split_heads(objIn):
        objIn = ad.reshape(objIn, (varBat, varLen, varNumHead, varDimHd))
        return ad.transpose(objIn, (0, 2, 1, 3))

    objQ = split_heads(linear(objX, dicPrm, strPfx + '.wq'))
    objK = split_heads(linear(objX, dicPrm, strPfx + '.wk'))
    objV = split_heads(linear(objX, dicPrm, strPfx + '.wv'))

    aryAdd = np.where(aryMsk, 0.0, varMskVal)[:, None, :, :]
    objScr = ad.scale(ad.matmul(objQ, ad.transpose(objK)),
                      1.0 / np.sqrt(varDimHd))
    objWgt = ad.softmax(ad.add(objScr, aryAdd), axis=-1)

    objAtt = ad.transpose(ad.matmul(objWgt, objV), (0, 2, 1, 3))
    objAtt = ad.reshape(objAtt, (varBat, varLen, varDim))
    objX1 = ad.add(objX, linear(objAtt, dicPrm, strPfx + '.wo'))

    objFfn = linear(ad.relu(linear(objX1, dicPrm, strPfx + '.ffn1')), dicPrm,
                    strPfx + '.ffn2')
    objOut = ad.add(objX1, objFfn)

    if lgcRetWgt:
        return objOut, objWgt
    return objOut


def encoder_stack(objX, aryMsk, dicPrm, strPfx, varNumLyr=1, varNumHead=1):
    """Apply the attention layers `strPfx.0 .. strPfx.<varNumLyr - 1>`."""
    for idxLyr in range(varNumLyr):
        objX = attention_layer(objX, aryMsk, dicPrm,
                               strPfx + '.' + str(idxLyr),
                               varNumHead=varNumHead)
    return objX
# *****************************************************************************


# *****************************************************************************
# *** Encoders

def object_features(objVt, dicPrm):
    """Category embedding concatenated with box geometry, [T, K, d_obj]."""
    aryCat = np.broadcast_to(objVt.vecTrkCat[None, :], objVt.aryPrsObj.shape)
    objEmb = ad.take(dicPrm['obj_cat_emb'], aryCat)
    return ad.concat([objEmb, ad.as_tensor(objVt.aryGeo)], axis=-1)


def encode_objects(objVt, dicPrm, varNumLyr=1, varNumHead=1):
    """
    Temporal self-attention over each object track.

    Parameters
    ----------
    objVt : VideoTensors
        Video arrays (at least one frame).
    dicPrm : dict
        Model parameters.
    varNumLyr, varNumHead : int
        Depth and head count of the encoder.

    Returns
    -------
    objV : Tensor
        Encoded object features, shape [T, K, d_obj].

    Notes
    -----
    Frame t of a track attends to frames <= t in which the object is present.
    No positional encoding is added.
    """
    varNumFrm = objVt.num_frames
    if varNumFrm < 1:
        raise ContractError('encode_objects needs at least one frame.')
    objFtr = ad.transpose(object_features(objVt, dicPrm), (1, 0, 2))
    aryMsk = causal_mask(varNumFrm)[None, :, :] & key_mask(objVt.aryPrsObj.T)
    objOut = encoder_stack(objFtr, aryMsk, dicPrm, 'obj_enc',
                           varNumLyr=varNumLyr, varNumHead=varNumHead)
    return ad.transpose(objOut, (1, 0, 2))


def build_pair_representations(objVt, objV, dicPrm):
    """
    Relationship representations of all (actor, object) pairs.

    Parameters
    ----------
    objVt : VideoTensors
        Video arrays.
    objV : Tensor
        Encoded object features, shape [T, K, d_obj].
    dicPrm : dict
        Model parameters (`pair.w1/w2/w3`, `sem_emb`).

    Returns
    -------
    objZ : Tensor or None
        Shape [T, P, 3 d_proj + 2 d_sem], laid out as
        [W1 v_actor | W2 v_object | W3 u | S_actor | S_object]; `None` if the
        video has no object besides the actor.
    """
    varNumPair = objVt.num_pairs
    if varNumPair < 1:
        return None
    varNumFrm = objVt.num_frames
    vecIdxAct = np.zeros(varNumPair, dtype=np.int64)
    objVact = ad.index(objV, (slice(None), vecIdxAct))
    objVobj = ad.index(objV, (slice(None), slice(1, None)))
    objGeoUni = ad.as_tensor(objVt.aryGeoUni)

    aryCatAct = np.full((varNumFrm, varNumPair), objVt.vecTrkCat[0])
    aryCatObj = np.broadcast_to(objVt.vecTrkCat[None, 1:],
                                (varNumFrm, varNumPair))

    return ad.concat([linear(objVact, dicPrm, 'pair.w1'),
                      linear(objVobj, dicPrm, 'pair.w2'),
                      linear(objGeoUni, dicPrm, 'pair.w3'),
                      ad.take(dicPrm['sem_emb'], aryCatAct),
                      ad.take(dicPrm['sem_emb'], aryCatObj)], axis=-1)


def spatial_encode(objZ, aryPrsPair, dicPrm, varNumLyr=1, varNumHead=1):
    """
    Self-attention among the relationships of each frame.

    Parameters
    ----------
    objZ : Tensor
        Relationship representations, shape [T, P, d].
    aryPrsPair : np.array
        Pair presence, shape [T, P] (bool); absent pairs are not attended.

    Returns
    -------
    objOut : Tensor
        Shape [T, P, d]. Frames are processed independently.
    """
    aryMsk = key_mask(aryPrsPair)
    return encoder_stack(objZ, aryMsk, dicPrm, 'spa_enc', varNumLyr=varNumLyr,
                         varNumHead=varNumHead)


def temporal_encode(objZ, aryPrsPair, dicPrm, varNumLyr=1, varNumHead=1):
    """
    Causal self-attention over the history of each relationship.

    Parameters
    ----------
    objZ : Tensor
        Spatially encoded representations, shape [T, P, d].
    aryPrsPair : np.array
        Pair presence, shape [T, P] (bool).

    Returns
    -------
    objOut : Tensor
        Shape [P, T, d]; entry [p, t] depends on frames <= t only.
    """
    varNumFrm = objZ.shape[0]
    if varNumFrm < 1:
        raise ContractError('temporal_encode needs a non-empty history.')
    objPos = dicPrm['tmp_pos']
    if varNumFrm > objPos.shape[0]:
        raise ContractError('History of ' + str(varNumFrm) + ' frames exceeds '
                            + 'the positional table (' + str(objPos.shape[0])
                            + ' frames).')
    objIn = ad.add(ad.transpose(objZ, (1, 0, 2)),
                   ad.index(objPos, slice(0, varNumFrm)))
    aryMsk = causal_mask(varNumFrm)[None, :, :] & key_mask(aryPrsPair.T)
    return encoder_stack(objIn, aryMsk, dicPrm, 'tmp_enc',
                         varNumLyr=varNumLyr, varNumHead=varNumHead)


def encode_video(objVt, dicPrm, varNumLyr=1, varNumHead=1, lgcTmp=True):
    """
    Run object, pair, spatial and (optionally) temporal encoding.

    Returns
    -------
    dicEnc : dict
        'obj' : Tensor [T, K, d_obj] encoded objects;
        'spa' : Tensor [T, P, d_rel] spatially encoded relationships;
        'tmp' : Tensor [P, T, d_rel] temporally encoded relationships (only
        if `lgcTmp`). Relationship entries are `None` without pairs.
    """
    objV = encode_objects(objVt, dicPrm, varNumLyr=varNumLyr,
                          varNumHead=varNumHead)
    dicEnc = {'obj': objV, 'spa': None, 'tmp': None}
    objZ = build_pair_representations(objVt, objV, dicPrm)
    if objZ is None:
        return dicEnc
    dicEnc['spa'] = spatial_encode(objZ, objVt.aryPrsPair, dicPrm,
                                   varNumLyr=varNumLyr, varNumHead=varNumHead)
    if lgcTmp:
        dicEnc['tmp'] = temporal_encode(dicEnc['spa'], objVt.aryPrsPair,
                                        dicPrm, varNumLyr=varNumLyr,
                                        varNumHead=varNumHead)
    return dicEnc
# *****************************************************************************
