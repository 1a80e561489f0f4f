"""
指令文法：

    VERB_PHRASE ("walk to" | "push" | "pull") ARTICLE ("a" | "the")
    [SIZE] [WEIGHT] COLOR SHAPE ["twice"]

"twice" 與 "heavy" 都表示 weight=heavy；未標示重量即為 light。
"""
from concepts.models import Concept, Verb, Color, Size, Weight, Shape


class GrammarError(ValueError):
    pass


class UnknownToken(GrammarError):
    pass


class MissingSlot(GrammarError):
    pass


class ConflictingWeight(GrammarError):
    pass


ARTICLES = ('a', 'the')
TWICE = 'twice'

_VOCABULARY = (
    {'walk', 'to', 'push', 'pull', TWICE}
    | set(ARTICLES)
    | set(Color.values) | set(Size.values) | set(Weight.values) | set(Shape.values)
)


def _tokenize(text: str) -> list:
    tokens = text.strip().lower().split()
    for token in tokens:
        if token not in _VOCABULARY:
            raise UnknownToken(f"無法辨識的字詞: {token!r}")
    return tokens


def parse_instruction(text: str) -> Concept:
    tokens = _tokenize(text)
    if not tokens:
        raise MissingSlot("指令為空")

    position = 0

    # 動詞片語
    head = tokens[position]
    if head == 'walk':
        if position + 1 >= len(tokens) or tokens[position + 1] != 'to':
            raise MissingSlot("'walk' 後面缺少 'to'")
        verb = Verb.WALK
        position += 2
    elif head in (Verb.PUSH, Verb.PULL):
        verb = Verb(head)
        position += 1
    else:
        raise MissingSlot(f"缺少動詞，收到 {head!r}")

    if position >= len(tokens) or tokens[position] not in ARTICLES:
        raise MissingSlot("缺少冠詞 'a' / 'the'")
    position += 1

    size = None
    if position < len(tokens) and tokens[position] in Size.values:
        size = Size(tokens[position])
        position += 1
    if size is None:
        raise MissingSlot("缺少尺寸 (small / big)")

    weight_word = None
    if position < len(tokens) and tokens[position] in Weight.values:
        weight_word = tokens[position]
        position += 1

    if position >= len(tokens) or tokens[position] not in Color.values:
        raise MissingSlot("缺少顏色")
    color = Color(tokens[position])
    position += 1

    if position >= len(tokens) or tokens[position] not in Shape.values:
        raise MissingSlot("缺少形狀")
    shape = Shape(tokens[position])
    position += 1

    twice = False
    if position < len(tokens) and tokens[position] == TWICE:
        twice = True
        position += 1

    if position != len(tokens):
        raise GrammarError(f"多餘的字詞: {' '.join(tokens[position:])!r}")

    if weight_word == Weight.LIGHT and twice:
        raise ConflictingWeight("'light' 不能與 'twice' 同時出現")
    weight = Weight.HEAVY if (twice or weight_word == Weight.HEAVY) else Weight.LIGHT

    return Concept(verb=verb, color=color, size=size, weight=weight, shape=shape)


def render_instruction(concept: Concept) -> str:
    """標準表面形式：push/pull 的重物以 'twice' 表示，walk 則用 'heavy' 形容詞"""
    heavy = concept.weight == Weight.HEAVY
    verb_phrase = 'walk to' if concept.verb == Verb.WALK else str(concept.verb)

    words = [verb_phrase, 'the', str(concept.size)]
    if heavy and concept.verb == Verb.WALK:
        words.append(str(Weight.HEAVY))
    words += [str(concept.color), str(concept.shape)]
    if heavy and concept.verb != Verb.WALK:
        words.append(TWICE)
    return ' '.join(words)
