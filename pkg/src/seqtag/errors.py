"""Exception hierarchy shared by all seqtag modules."""


class SeqtagError(Exception):
    """Base class for every error raised by this package."""


class MalformedLine(SeqtagError):
    def __init__(self, line_no, detail=""):
        self.line_no = line_no
        super().__init__(f"line {line_no}: malformed line{': ' + detail if detail else ''}")


class UnknownTag(SeqtagError):
    def __init__(self, tag, line_no=None):
        self.tag = tag
        self.line_no = line_no
        where = f" at line {line_no}" if line_no is not None else ""
        super().__init__(f"unknown tag {tag!r}{where}")


class EmptyDocument(SeqtagError):
    pass


class MissingTag(SeqtagError):
    def __init__(self, position):
        self.position = position
        super().__init__(f"token at {position} has no tag of the requested kind")


class OffsetOutOfBounds(SeqtagError):
    def __init__(self, ann_id, start, end, length):
        self.ann_id = ann_id
        super().__init__(f"{ann_id}: offsets {start}..{end} outside text of length {length}")


class SurfaceMismatch(SeqtagError):
    def __init__(self, ann_id, expected, found):
        self.ann_id = ann_id
        super().__init__(f"{ann_id}: annotation surface {expected!r} != text slice {found!r}")


class MisalignedSpan(SeqtagError):
    def __init__(self, ann_id, detail=""):
        self.ann_id = ann_id
        super().__init__(f"{ann_id}: span does not align with token boundaries{': ' + detail if detail else ''}")


class InvalidBio(SeqtagError):
    def __init__(self, position, prev_tag, tag):
        self.position = position
        super().__init__(f"invalid BIO transition {prev_tag} -> {tag} at position {position}")


class OverlappingEntities(SeqtagError):
    pass


class SpanOutOfBounds(SeqtagError):
    pass


class AllPathsMasked(SeqtagError):
    pass


class NonFiniteLoss(SeqtagError):
    pass


class VersionMismatch(SeqtagError):
    pass


class CorruptFile(SeqtagError):
    pass


class TokenizationMismatch(SeqtagError):
    pass


class SchemeMismatch(SeqtagError):
    pass
