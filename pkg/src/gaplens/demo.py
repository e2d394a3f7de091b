"""Built-in demo course and canonical scripted fixtures.

Everything here is synthetic but deterministic: a small AI-course KC list,
a matching course corpus, the 20-profile benchmark (4 groups of 5 students,
each group sharing one planted missing KC), and a 20-dialogue labeled
transcript set for the completeness check. The scripted provider replies
are aligned so the whole pipeline runs offline, bit-identically, with no
network access.
"""

from __future__ import annotations

import json

from .analysis import GapAnalyzer
from .dialogue import DialogueAgent
from .evaluation import StudentProfile
from .gateway import ScriptedProvider
from .kc import KcRegistry, parse_kc_list
from .retrieval import ChunkIndex, ingest_course_material

DEMO_COURSE_ID = "ai-101"

# One planted missing KC per benchmark group.
PLANTED_KCS = {
    "g1": "KC1.6.1",
    "g2": "KC2.4.1",
    "g3": "KC1.3.1",
    "g4": "KC1.2.1",
}

_NOISE_KC_BY_GROUP = {"g1": "KC3.1.1", "g2": "KC3.1.1", "g3": "KC3.1.2", "g4": "KC3.1.2"}
_EXTRA_NOISE_KC = "KC3.2.1"

DEMO_KC_DOCUMENT: dict = {
    "course_id": DEMO_COURSE_ID,
    "components": [
        {"id": "KC1", "title": "Machine Learning Fundamentals", "detail": ""},
        {
            "id": "KC1.1",
            "title": "Describe the supervised learning workflow",
            "detail": "Data collection, feature extraction, training, evaluation, deployment.",
        },
        {
            "id": "KC1.2",
            "title": "Evaluate classification models with appropriate metrics",
            "detail": "",
        },
        {
            "id": "KC1.2.1",
            "title": "Distinguish dataset-level accuracy from per-prediction probability",
            "detail": (
                "Accuracy summarizes how many samples a model classified correctly; "
                "a predicted probability describes the model's belief about one sample. "
                "For example, score() reporting 0.93 does not mean each prediction is "
                "correct with probability 0.93."
            ),
        },
        {
            "id": "KC1.3",
            "title": "Select a learning paradigm for a given problem",
            "detail": "",
        },
        {
            "id": "KC1.3.1",
            "title": "Choose between supervised and unsupervised methods from data characteristics",
            "detail": (
                "Labeled input-output pairs call for supervised learning of the mapping; "
                "unlabeled data calls for unsupervised structure discovery such as clustering."
            ),
        },
        {
            "id": "KC1.6",
            "title": "Reason about generalization and model selection",
            "detail": "",
        },
        {
            "id": "KC1.6.1",
            "title": "Use train, validation, and test splits for their distinct purposes",
            "detail": (
                "The validation set steers model and hyperparameter choices, so strong "
                "validation accuracy alone does not certify performance on held-out test data."
            ),
        },
        {"id": "KC2", "title": "Search and Planning", "detail": ""},
        {
            "id": "KC2.4",
            "title": "Apply informed search algorithms",
            "detail": "",
        },
        {
            "id": "KC2.4.1",
            "title": "Require admissible heuristics for A* optimality",
            "detail": (
                "A* is only guaranteed to return a cheapest path when the heuristic never "
                "overestimates the true remaining cost."
            ),
        },
        {"id": "KC3", "title": "Probabilistic Reasoning", "detail": ""},
        {"id": "KC3.1", "title": "Apply Bayes rule to diagnostic problems", "detail": ""},
        {
            "id": "KC3.1.1",
            "title": "Separate prior, likelihood, and posterior in Bayes rule",
            "detail": "",
        },
        {
            "id": "KC3.1.2",
            "title": "Distinguish conditional from joint probability",
            "detail": "",
        },
        {"id": "KC3.2", "title": "Reason with independence assumptions", "detail": ""},
        {
            "id": "KC3.2.1",
            "title": "Recognize when independence assumptions are violated",
            "detail": "",
        },
    ],
}

_DEMO_DOCS: list[tuple[str, str]] = [
    (
        "model_evaluation.txt",
        "Evaluating a classifier starts with held-out data. The score method of a "
        "fitted scikit-learn classifier such as logistic regression returns accuracy: "
        "the fraction of samples in the given set that the model classified correctly. "
        "Accuracy is a dataset-level summary. It says nothing about how confident the "
        "model is in any individual prediction. Per-sample confidence comes from "
        "predict_proba, which returns a probability for each class for each sample. "
        "A model with 0.93 accuracy may still make some predictions with probability "
        "barely above 0.5 and others with probability near 1.0. "
        "Good practice splits data three ways. The training set fits parameters. The "
        "validation set compares candidate models and tunes hyperparameters. Because "
        "choices were made to please the validation set, its accuracy is an optimistic "
        "estimate; only the untouched test set estimates real generalization. Report "
        "test accuracy once, at the end, after all tuning is frozen. Cross-validation "
        "rotates the validation role across folds when data is scarce. Beyond accuracy, "
        "precision, recall, and the confusion matrix expose the kinds of errors a "
        "classifier makes, which matters whenever classes are imbalanced.",
    ),
    (
        "informed_search.txt",
        "Informed search algorithms use a heuristic estimate h(n) of the remaining "
        "cost from node n to a goal. Greedy best-first search expands the node with "
        "the smallest h(n) and can be led badly astray. A* orders the frontier by "
        "f(n) = g(n) + h(n), the cost so far plus the estimate to go. A* returns a "
        "cheapest path when the heuristic is admissible, meaning it never "
        "overestimates the true remaining cost. An inadmissible heuristic can make "
        "A* return a suboptimal path, because a too-large estimate hides the cheap "
        "route behind an inflated f value. Consistency (monotonicity) additionally "
        "guarantees that the first time A* expands a node it has found the cheapest "
        "path to it, so no node needs reopening. The straight-line distance is the "
        "classic admissible heuristic for road maps: driving can never be shorter "
        "than the straight line. Designing heuristics usually means relaxing the "
        "problem until the remaining cost can be computed exactly.",
    ),
    (
        "learning_paradigms.txt",
        "Choosing a learning method starts with the data. When examples carry labels, "
        "input features X paired with targets y, supervised learning fits the mapping "
        "from X to y: classification for discrete targets, regression for continuous "
        "ones. When data is unlabeled, unsupervised learning looks for structure: "
        "k-means clustering groups similar points, and dimensionality reduction such "
        "as PCA compresses features. Clustering does not predict a designated target "
        "variable; if a target exists and is labeled, a supervised method uses that "
        "signal directly and will normally beat clustering repurposed for prediction. "
        "Probabilistic models add a third lens. Bayes rule combines a prior belief "
        "with the likelihood of the observed evidence to produce a posterior. The "
        "prior and the posterior answer different questions, and a conditional "
        "probability P(A given B) is not the joint probability P(A and B). Naive "
        "Bayes assumes features are conditionally independent given the class; when "
        "features are strongly correlated that assumption is violated and the "
        "probabilities it reports become overconfident.",
    ),
]


def demo_registry() -> KcRegistry:
    return parse_kc_list(DEMO_KC_DOCUMENT)


def demo_kc_json() -> str:
    return json.dumps(DEMO_KC_DOCUMENT, indent=2) + "\n"


def demo_corpus() -> list[tuple[str, str]]:
    return list(_DEMO_DOCS)


def demo_index() -> ChunkIndex:
    return ingest_course_material(demo_corpus())


def _finding(verdict: str, kc_id: str | None = None, confidence: float | None = None, misconception: str | None = None) -> dict:
    item: dict = {"verdict": verdict}
    if kc_id is not None:
        item["kc_id"] = kc_id
        item["confidence"] = confidence
        item["misconception"] = misconception
    return item


def _finding_list(*items: dict) -> str:
    return json.dumps({"findings": list(items)})


_GROUP_OPENERS = {
    "g1": (
        "I trained a digit classifier and the validation accuracy is {n}%, so the model "
        "is basically ready to hand in, right? Here is my training setup."
    ),
    "g2": (
        "My A* implementation sometimes returns a longer route than plain BFS. I set "
        "h(n) to twice the straight-line distance to make it search faster."
    ),
    "g3": (
        "I have {n} labeled examples of spam and not-spam emails, and I'm running "
        "k-means with k=2 to predict the labels. The clusters look off, can you help?"
    ),
    "g4": (
        "My logistic regression prints {n}% from score() on the test set. Does that "
        "mean each email it flags is spam with {n}% probability?"
    ),
}

_GROUP_FOLLOWUPS = {
    "g1": (
        "I tuned the learning rate until the validation score peaked, so the number "
        "should carry over to the graded test set, shouldn't it?"
    ),
    "g2": (
        "I thought a bigger heuristic just means the search commits to the goal "
        "faster without changing which path comes out. Where does that break?"
    ),
    "g3": (
        "I figured clustering is the more advanced method, so it should beat a "
        "plain classifier even though my emails already have labels."
    ),
    "g4": (
        "So when it predicts spam for one message, the model is {n}% sure about "
        "that particular message, because that's what the score said?"
    ),
}

_GROUP_MISCONCEPTIONS = {
    "g1": "Treats peak validation accuracy as a certificate of test-set performance.",
    "g2": "Believes scaling a heuristic above the true remaining cost leaves A* optimal.",
    "g3": "Reaches for unsupervised clustering to predict an already-labeled target.",
    "g4": "Reads dataset-level accuracy as the probability attached to each prediction.",
}

_NOISE_MISCONCEPTIONS = {
    "KC3.1.1": "Swaps the prior and the posterior when applying Bayes rule.",
    "KC3.1.2": "Uses a joint probability where the conditional is required.",
    "KC3.2.1": "Assumes correlated features stay independent given the class.",
}

_TUTOR_REPLY_1 = (
    "Let's work through your setup step by step; the part worth examining is how the "
    "{topic} fits in. Walk me through it: what do you expect {probe}?"
)
_TUTOR_REPLY_2 = (
    "Good, that detail tells me a lot. Compare the two quantities we just separated "
    "and check your code once more. Which of them does your final number report, and "
    "what would you use for the other one?"
)

_GROUP_TOPICS = {
    "g1": ("validation set", "to change if you re-tuned on a fresh split"),
    "g2": ("heuristic", "A* to do when the estimate exceeds the true cost"),
    "g3": ("labels", "k-means to do with the labels you already have"),
    "g4": ("score method", "score() to average over"),
}

_GROUP_ORDER = ("g1", "g2", "g3", "g4")
_BEHAVIOR_CYCLE = ("terse", "verbose", "copies-material", "asks-follow-ups", "terse")

# Profile position -> turn of first detection, per group. 14 turn-1 and
# 6 turn-2 detections overall, giving a mean detection turn of 26/20 = 1.3.
_DETECTION_TURNS = {
    "g1": (1, 1, 1, 1, 2),
    "g2": (1, 1, 1, 1, 2),
    "g3": (1, 1, 1, 2, 2),
    "g4": (1, 1, 1, 2, 2),
}

# Position 1 of every group reports a higher-confidence noise KC alongside
# the planted one (top-1 miss): 16/20 top-1 matches.
_MISMATCH_POSITION = 1

# Two sessions pick up an incidental extra gap so the distribution has a
# realistic tail below the four planted KCs.
_EXTRA_NOISE_SESSIONS = {("g1", 2), ("g3", 0)}


def benchmark_profiles() -> list[StudentProfile]:
    profiles = []
    for group in _GROUP_ORDER:
        for position in range(5):
            number = 88 + position
            opener = _GROUP_OPENERS[group].format(n=number)
            followup = _GROUP_FOLLOWUPS[group].format(n=number)
            profiles.append(
                StudentProfile(
                    profile_id=f"{group}-s{position}",
                    group_id=group,
                    missing_kc=PLANTED_KCS[group],
                    behavior=_BEHAVIOR_CYCLE[position],
                    script=[opener, followup],
                )
            )
    return profiles


def benchmark_scripts() -> tuple[list[str], list[str]]:
    """Provider scripts aligned with benchmark_profiles() run in order.

    Returns (dialogue replies, analysis replies): two of each per profile,
    since every scripted session has two student messages and therefore two
    turn pairs.
    """
    dialogue: list[str] = []
    analysis: list[str] = []
    for group in _GROUP_ORDER:
        planted = PLANTED_KCS[group]
        misconception = _GROUP_MISCONCEPTIONS[group]
        topic, probe = _GROUP_TOPICS[group]
        for position in range(5):
            dialogue.append(_TUTOR_REPLY_1.format(topic=topic, probe=probe))
            dialogue.append(_TUTOR_REPLY_2)

            detection_turn = _DETECTION_TURNS[group][position]
            planted_gap = _finding("gap", planted, 0.85, misconception)
            if detection_turn == 1:
                first = [planted_gap]
                second = [_finding("correct")]
                if position == _MISMATCH_POSITION:
                    noise_kc = _NOISE_KC_BY_GROUP[group]
                    first = [
                        _finding("gap", planted, 0.6, misconception),
                        _finding("gap", noise_kc, 0.9, _NOISE_MISCONCEPTIONS[noise_kc]),
                    ]
                if (group, position) in _EXTRA_NOISE_SESSIONS:
                    second = [
                        _finding(
                            "gap", _EXTRA_NOISE_KC, 0.5, _NOISE_MISCONCEPTIONS[_EXTRA_NOISE_KC]
                        )
                    ]
            else:
                first = [_finding("correct")]
                second = [planted_gap]
            analysis.append(_finding_list(*first))
            analysis.append(_finding_list(*second))
    return dialogue, analysis


def build_benchmark() -> tuple[list[StudentProfile], KcRegistry, DialogueAgent, GapAnalyzer]:
    """Fresh, fully scripted benchmark pipeline: profiles, registry, agent, analyzer."""
    registry = demo_registry()
    dialogue_script, analysis_script = benchmark_scripts()
    agent = DialogueAgent(
        provider=ScriptedProvider(dialogue_script),
        index=demo_index(),
        course_id=DEMO_COURSE_ID,
    )
    analyzer = GapAnalyzer(provider=ScriptedProvider(analysis_script), registry=registry)
    return benchmark_profiles(), registry, agent, analyzer


# --- three-turn score()/probability dialogue used by the service demo ---

def motivating_dialogue() -> list[tuple[str, str]]:
    """(student message, tutor reply) turns for a short accuracy-vs-probability chat."""
    return [
        (
            "what does clf.score(X_test, y_test) actually measure for my logistic regression?",
            "score() returns accuracy: the fraction of the test samples your model "
            "classified correctly. What were you hoping that number would tell you "
            "about the model?",
        ),
        (
            "so if it prints 0.93, the model classifies each point correctly with 93% probability?",
            "Not quite. 0.93 says 93 out of every 100 test points were labeled "
            "correctly; it is an average over the whole set. Per-point confidence "
            "comes from predict_proba. Which of the two do you need for your task?",
        ),
        (
            "ok, but then the model is 93% confident about every single prediction it makes?",
            "That's the distinction to pin down: accuracy is a dataset-level summary, "
            "while confidence belongs to one prediction at a time and varies sample "
            "by sample. Try printing predict_proba for a few rows. What do you expect "
            "to see for the points near the decision boundary?",
        ),
    ]


def demo_chat_scripts() -> tuple[list[str], list[str]]:
    """Cycling scripts for the no-network demo server."""
    dialogue = [reply for _, reply in motivating_dialogue()]
    analysis = [
        _finding_list(
            _finding(
                "gap",
                "KC1.2.1",
                0.8,
                "Reads dataset-level accuracy as the probability attached to each prediction.",
            )
        ),
        _finding_list(
            _finding(
                "gap",
                "KC1.2.1",
                0.9,
                "Believes the model is equally confident about every prediction.",
            )
        ),
        _finding_list(_finding("correct")),
    ]
    return dialogue, analysis


# --- labeled transcript fixture for the completeness check ---

_LABEL_POOL = (
    "KC1.2.1",
    "KC1.3.1",
    "KC1.6.1",
    "KC2.4.1",
    "KC3.1.1",
    "KC3.1.2",
    "KC3.2.1",
    "KC1.1",
    "KC2.4",
    "KC3.1",
)

_TRANSCRIPT_OPENER = (
    "I'm stuck on exercise {i}: my answer disagrees with the solution sheet and "
    "I can't tell which step goes wrong. Here is what I did."
)
_TRANSCRIPT_FOLLOWUP = (
    "I assumed the quantity from lecture {i} could be reused directly here, "
    "is that where it breaks?"
)
_TRANSCRIPT_TUTOR = (
    "Let's compare your step with the definition from the notes. What does the "
    "quantity you computed actually range over?"
)


def completeness_fixture() -> tuple[list[dict], dict[str, list[str]], list[str]]:
    """20 labeled transcripts; one is deliberately below the evidence threshold.

    Returns (transcripts, labels, analysis provider script). Dialogues d01
    through d19 are analyzable and their scripted findings cover every
    labeled KC (sometimes more); d20 is a single terse prompt that the
    analyzer refuses deterministically.
    """
    transcripts: list[dict] = []
    labels: dict[str, list[str]] = {}
    script: list[str] = []
    for i in range(1, 20):
        dialogue_id = f"d{i:02d}"
        label_count = 1 + (i % 3)
        labeled = [_LABEL_POOL[(i + j) % len(_LABEL_POOL)] for j in range(label_count)]
        labels[dialogue_id] = labeled
        transcripts.append(
            {
                "dialogue_id": dialogue_id,
                "messages": [
                    {"role": "user", "content": _TRANSCRIPT_OPENER.format(i=i)},
                    {"role": "assistant", "content": _TRANSCRIPT_TUTOR},
                    {"role": "user", "content": _TRANSCRIPT_FOLLOWUP.format(i=i)},
                ],
            }
        )
        first_findings = [
            _finding("gap", kc, 0.7, f"Misapplies the idea behind {kc} in exercise {i}.")
            for kc in labeled
        ]
        script.append(_finding_list(*first_findings))
        if i % 4 == 0:
            extra = _LABEL_POOL[(i + 5) % len(_LABEL_POOL)]
            if extra in labeled:
                extra = _LABEL_POOL[(i + 6) % len(_LABEL_POOL)]
            script.append(
                _finding_list(
                    _finding("gap", extra, 0.55, f"Also shaky on {extra} when probed further.")
                )
            )
        else:
            script.append(_finding_list(_finding("correct")))

    labels["d20"] = ["KC1.2.1"]
    transcripts.append(
        {
            "dialogue_id": "d20",
            "messages": [{"role": "user", "content": "write bfs in python"}],
        }
    )
    return transcripts, labels, script
