"""Chess rules: FEN/SAN/PGN handling, legal move generation, repetition tracking.

Squares are integers 0..63 with a1 = 0, b1 = 1, ..., h8 = 63. Pieces are the
usual FEN letters (upper case for White). Every value here is immutable.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Sequence

WHITE = "w"
BLACK = "b"
FILES = "abcdefgh"
START_FEN = "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1"
PIECE_LETTERS = "PNBRQKpnbrqk"
PIECE_VALUES = {"P": 1, "N": 3, "B": 3, "R": 5, "Q": 9, "K": 0}

SAN_PATTERN = re.compile(
    r"^(?:O-O(?:-O)?|[KQRBN][a-h]?[1-8]?x?[a-h][1-8]|[a-h](?:x[a-h])?[1-8](?:=[QRBN])?)[+#]?$"
)


class ChessError(ValueError):
    pass


class FenError(ChessError):
    pass


class IllegalMoveError(ChessError):
    def __init__(self, san: str, index: int | None = None, fen: str | None = None):
        self.san = san
        self.index = index
        where = f" at index {index}" if index is not None else ""
        pos = f" in {fen}" if fen else ""
        super().__init__(f"illegal move {san!r}{where}{pos}")


def square_name(sq: int) -> str:
    return FILES[sq & 7] + str((sq >> 3) + 1)


def parse_square(name: str) -> int:
    if len(name) != 2 or name[0] not in FILES or name[1] not in "12345678":
        raise ChessError(f"bad square {name!r}")
    return FILES.index(name[0]) + 8 * (int(name[1]) - 1)


def _other(color: str) -> str:
    return BLACK if color == WHITE else WHITE


def _walk(sq: int, df: int, dr: int) -> int | None:
    f, r = (sq & 7) + df, (sq >> 3) + dr
    if 0 <= f < 8 and 0 <= r < 8:
        return f + 8 * r
    return None


def _step_table(deltas) -> tuple[tuple[int, ...], ...]:
    table = []
    for sq in range(64):
        table.append(tuple(t for t in (_walk(sq, df, dr) for df, dr in deltas) if t is not None))
    return tuple(table)


def _ray_table(directions) -> tuple[tuple[tuple[int, ...], ...], ...]:
    table = []
    for sq in range(64):
        rays = []
        for df, dr in directions:
            ray, cur = [], _walk(sq, df, dr)
            while cur is not None:
                ray.append(cur)
                cur = _walk(cur, df, dr)
            rays.append(tuple(ray))
        table.append(tuple(rays))
    return tuple(table)


KNIGHT_STEPS = _step_table([(1, 2), (2, 1), (2, -1), (1, -2), (-1, -2), (-2, -1), (-2, 1), (-1, 2)])
KING_STEPS = _step_table([(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)])
ROOK_RAYS = _ray_table([(1, 0), (-1, 0), (0, 1), (0, -1)])
BISHOP_RAYS = _ray_table([(1, 1), (1, -1), (-1, 1), (-1, -1)])
# squares from which a pawn of the given color attacks the key square
PAWN_ATTACKERS = {
    WHITE: _step_table([(-1, -1), (1, -1)]),
    BLACK: _step_table([(-1, 1), (1, 1)]),
}
PAWN_CAPTURES = {
    WHITE: _step_table([(-1, 1), (1, 1)]),
    BLACK: _step_table([(-1, -1), (1, -1)]),
}

# castling right -> (king from, king to, rook from, rook to, squares that must be empty, squares king crosses)
CASTLING = {
    "K": (4, 6, 7, 5, (5, 6), (4, 5, 6)),
    "Q": (4, 2, 0, 3, (1, 2, 3), (4, 3, 2)),
    "k": (60, 62, 63, 61, (61, 62), (60, 61, 62)),
    "q": (60, 58, 56, 59, (57, 58, 59), (60, 59, 58)),
}
# a move touching one of these squares clears the listed rights
_RIGHTS_CLEARED = {0: "Q", 4: "KQ", 7: "K", 56: "q", 60: "kq", 63: "k"}


class Move(NamedTuple):
    """Bare move: from/to squares and optional promotion letter (upper case)."""

    from_sq: int
    to_sq: int
    promotion: str | None = None

    def uci(self) -> str:
        promo = self.promotion.lower() if self.promotion else ""
        return square_name(self.from_sq) + square_name(self.to_sq) + promo


@dataclass(frozen=True)
class MoveRecord:
    san: str
    from_square: int
    to_square: int
    promotion: str | None = None
    is_capture: bool = False
    is_check: bool = False
    is_mate: bool = False

    @property
    def move(self) -> Move:
        return Move(self.from_square, self.to_square, self.promotion)

    def uci(self) -> str:
        return self.move.uci()


@dataclass(frozen=True, slots=True)
class BoardState:
    """A full chess position.

    ``placement`` is a 64-tuple indexed by square, holding a FEN piece letter
    or ``None``. ``castling`` is a subset of ``"KQkq"`` in that order.
    """

    placement: tuple
    side_to_move: str = WHITE
    castling: str = ""
    en_passant: int | None = None
    halfmove_clock: int = 0
    fullmove_number: int = 1

    @property
    def grid(self) -> list[list[str | None]]:
        """8x8 rows, rank 8 first (the FEN reading order)."""
        return [list(self.placement[8 * r: 8 * r + 8]) for r in range(7, -1, -1)]

    def piece_at(self, sq: int) -> str | None:
        return self.placement[sq]

    def king_square(self, color: str) -> int:
        return self.placement.index("K" if color == WHITE else "k")

    def validate(self) -> None:
        p = self.placement
        if len(p) != 64 or any(x is not None and x not in PIECE_LETTERS for x in p):
            raise FenError("placement must hold 64 squares of piece letters or None")
        if p.count("K") != 1 or p.count("k") != 1:
            raise FenError("exactly one king per color required")
        if any(p[sq] in ("P", "p") for sq in (*range(8), *range(56, 64))):
            raise FenError("pawn on first or last rank")
        if self.side_to_move not in (WHITE, BLACK):
            raise FenError(f"bad side to move {self.side_to_move!r}")
        if self.castling != "".join(c for c in "KQkq" if c in self.castling):
            raise FenError(f"bad castling field {self.castling!r}")
        for right in self.castling:
            king_from, _, rook_from, *_ = CASTLING[right]
            king, rook = ("K", "R") if right.isupper() else ("k", "r")
            if p[king_from] != king or p[rook_from] != rook:
                raise FenError(f"castling right {right} without king and rook at home")
        if self.en_passant is not None:
            rank = (self.en_passant >> 3) + 1
            if rank not in (3, 6):
                raise FenError("en passant target must lie on rank 3 or 6")
            if (rank == 6) != (self.side_to_move == WHITE):
                raise FenError("en passant target inconsistent with side to move")
        if self.halfmove_clock < 0 or self.fullmove_number < 1:
            raise FenError("clock values out of range")


def initial_board() -> BoardState:
    return parse_fen(START_FEN)


# ---------------------------------------------------------------------------
# FEN


def parse_fen(text: str) -> BoardState:
    fields = text.split()
    if len(fields) != 6:
        raise FenError(f"expected 6 FEN fields, got {len(fields)}")
    placement_text, side, castling, ep, half, full = fields
    ranks = placement_text.split("/")
    if len(ranks) != 8:
        raise FenError("placement must have 8 ranks")
    placement: list[str | None] = [None] * 64
    for i, rank_text in enumerate(ranks):
        row: list[str | None] = []
        for ch in rank_text:
            if ch in "12345678":
                row.extend([None] * int(ch))
            elif ch in PIECE_LETTERS:
                row.append(ch)
            else:
                raise FenError(f"illegal piece letter {ch!r}")
        if len(row) != 8:
            raise FenError(f"rank {8 - i} expands to {len(row)} squares")
        base = 8 * (7 - i)
        placement[base: base + 8] = row
    if castling == "-":
        castling = ""
    if len(set(castling)) != len(castling) or any(c not in "KQkq" for c in castling):
        raise FenError(f"bad castling field {castling!r}")
    try:
        ep_sq = None if ep == "-" else parse_square(ep)
        half_n, full_n = int(half), int(full)
    except ValueError as exc:
        raise FenError(str(exc)) from None
    board = BoardState(
        tuple(placement),
        side,
        "".join(c for c in "KQkq" if c in castling),
        ep_sq,
        half_n,
        full_n,
    )
    board.validate()
    return board


def placement_fen(placement: Sequence[str | None]) -> str:
    rows = []
    for r in range(7, -1, -1):
        out, empty = [], 0
        for f in range(8):
            piece = placement[8 * r + f]
            if piece is None:
                empty += 1
            else:
                if empty:
                    out.append(str(empty))
                    empty = 0
                out.append(piece)
        if empty:
            out.append(str(empty))
        rows.append("".join(out))
    return "/".join(rows)


def serialize_fen(board: BoardState) -> str:
    ep = square_name(board.en_passant) if board.en_passant is not None else "-"
    return " ".join(
        [
            placement_fen(board.placement),
            board.side_to_move,
            board.castling or "-",
            ep,
            str(board.halfmove_clock),
            str(board.fullmove_number),
        ]
    )


def canonical_fen(text: str) -> str:
    return serialize_fen(parse_fen(text))


# ---------------------------------------------------------------------------
# attacks and move generation


def is_attacked(placement: Sequence[str | None], sq: int, by: str) -> bool:
    if by == WHITE:
        pawn, knight, bishop, rook, queen, king = "PNBRQK"
    else:
        pawn, knight, bishop, rook, queen, king = "pnbrqk"
    for s in PAWN_ATTACKERS[by][sq]:
        if placement[s] == pawn:
            return True
    for s in KNIGHT_STEPS[sq]:
        if placement[s] == knight:
            return True
    for s in KING_STEPS[sq]:
        if placement[s] == king:
            return True
    for ray in ROOK_RAYS[sq]:
        for s in ray:
            piece = placement[s]
            if piece is not None:
                if piece == rook or piece == queen:
                    return True
                break
    for ray in BISHOP_RAYS[sq]:
        for s in ray:
            piece = placement[s]
            if piece is not None:
                if piece == bishop or piece == queen:
                    return True
                break
    return False


def in_check(board: BoardState) -> bool:
    return is_attacked(board.placement, board.king_square(board.side_to_move), _other(board.side_to_move))


def _pseudo_moves(board: BoardState) -> Iterator[Move]:
    p = board.placement
    color = board.side_to_move
    white = color == WHITE
    for sq in range(64):
        piece = p[sq]
        if piece is None or piece.isupper() != white:
            continue
        kind = piece.upper()
        if kind == "P":
            step = 8 if white else -8
            start_rank, last_rank = (1, 7) if white else (6, 0)
            one = sq + step
            if p[one] is None:
                if one >> 3 == last_rank:
                    for promo in "QRBN":
                        yield Move(sq, one, promo)
                else:
                    yield Move(sq, one)
                    if sq >> 3 == start_rank and p[one + step] is None:
                        yield Move(sq, one + step)
            for t in PAWN_CAPTURES[color][sq]:
                target = p[t]
                if (target is not None and target.isupper() != white) or t == board.en_passant:
                    if t >> 3 == last_rank:
                        for promo in "QRBN":
                            yield Move(sq, t, promo)
                    else:
                        yield Move(sq, t)
        elif kind == "N" or kind == "K":
            for t in (KNIGHT_STEPS if kind == "N" else KING_STEPS)[sq]:
                target = p[t]
                if target is None or target.isupper() != white:
                    yield Move(sq, t)
        else:
            rays = ()
            if kind in "RQ":
                rays += ROOK_RAYS[sq]
            if kind in "BQ":
                rays += BISHOP_RAYS[sq]
            for ray in rays:
                for t in ray:
                    target = p[t]
                    if target is None:
                        yield Move(sq, t)
                    else:
                        if target.isupper() != white:
                            yield Move(sq, t)
                        break
    # castling
    enemy = _other(color)
    for right in (("K", "Q") if white else ("k", "q")):
        if right not in board.castling:
            continue
        king_from, king_to, _, _, empty, crossed = CASTLING[right]
        if any(p[s] is not None for s in empty):
            continue
        if any(is_attacked(p, s, enemy) for s in crossed):
            continue
        yield Move(king_from, king_to)


def _make(board: BoardState, move: Move) -> BoardState:
    """Apply a pseudo-legal move without legality checks."""
    p = list(board.placement)
    frm, to, promo = move
    piece = p[frm]
    white = board.side_to_move == WHITE
    captured = p[to]
    kind = piece.upper()
    ep = None
    if kind == "P":
        if to == board.en_passant and captured is None:
            p[to - 8 if white else to + 8] = None
            captured = "p" if white else "P"
        if abs(to - frm) == 16:
            ep = (frm + to) // 2
        if promo:
            piece = promo if white else promo.lower()
    elif kind == "K" and abs(to - frm) == 2:
        right = {6: "K", 2: "Q", 62: "k", 58: "q"}[to]
        _, _, rook_from, rook_to, _, _ = CASTLING[right]
        p[rook_to] = p[rook_from]
        p[rook_from] = None
    p[to] = piece
    p[frm] = None
    castling = board.castling
    if castling:
        for sq in (frm, to):
            cleared = _RIGHTS_CLEARED.get(sq)
            if cleared:
                castling = "".join(c for c in castling if c not in cleared)
    half = 0 if (kind == "P" or captured is not None) else board.halfmove_clock + 1
    full = board.fullmove_number + (0 if white else 1)
    return BoardState(tuple(p), BLACK if white else WHITE, castling, ep, half, full)


def _is_legal_after(board: BoardState, after: BoardState) -> bool:
    mover = board.side_to_move
    king = "K" if mover == WHITE else "k"
    return not is_attacked(after.placement, after.placement.index(king), _other(mover))


def legal_move_list(board: BoardState) -> list[Move]:
    """Legal moves as bare ``Move`` tuples (generation order, no SAN)."""
    out = []
    for move in _pseudo_moves(board):
        if _is_legal_after(board, _make(board, move)):
            out.append(move)
    return out


def has_legal_move(board: BoardState) -> bool:
    for move in _pseudo_moves(board):
        if _is_legal_after(board, _make(board, move)):
            return True
    return False


def _san(board: BoardState, move: Move, legal: Sequence[Move], after: BoardState) -> tuple[str, bool, bool, bool]:
    p = board.placement
    piece = p[move.from_sq]
    kind = piece.upper()
    capture = p[move.to_sq] is not None or (kind == "P" and move.to_sq == board.en_passant)
    if kind == "K" and abs(move.to_sq - move.from_sq) == 2:
        san = "O-O" if move.to_sq > move.from_sq else "O-O-O"
    elif kind == "P":
        san = ""
        if capture:
            san = FILES[move.from_sq & 7] + "x"
        san += square_name(move.to_sq)
        if move.promotion:
            san += "=" + move.promotion
    else:
        rivals = [
            m.from_sq for m in legal
            if m.to_sq == move.to_sq and m.from_sq != move.from_sq and p[m.from_sq] == piece
        ]
        prefix = ""
        if rivals:
            if all((r & 7) != (move.from_sq & 7) for r in rivals):
                prefix = FILES[move.from_sq & 7]
            elif all((r >> 3) != (move.from_sq >> 3) for r in rivals):
                prefix = str((move.from_sq >> 3) + 1)
            else:
                prefix = square_name(move.from_sq)
        san = kind + prefix + ("x" if capture else "") + square_name(move.to_sq)
    check = in_check(after)
    mate = check and not has_legal_move(after)
    if mate:
        san += "#"
    elif check:
        san += "+"
    return san, capture, check, mate


def legal_moves(board: BoardState) -> list[MoveRecord]:
    """All strictly legal moves, sorted by SAN."""
    legal = legal_move_list(board)
    records = []
    for move in legal:
        after = _make(board, move)
        san, capture, check, mate = _san(board, move, legal, after)
        records.append(MoveRecord(san, move.from_sq, move.to_sq, move.promotion, capture, check, mate))
    records.sort(key=lambda r: r.san)
    return records


def san_of(board: BoardState, move: Move) -> str:
    legal = legal_move_list(board)
    if move not in legal:
        raise IllegalMoveError(move.uci(), fen=serialize_fen(board))
    return _san(board, move, legal, _make(board, move))[0]


def is_san_shaped(text: str) -> bool:
    """Grammar-only SAN check: could this string be a move on some board?"""
    return bool(SAN_PATTERN.match(text))


def _strip_suffix(san: str) -> str:
    return san.rstrip("+#!?")


def parse_san(board: BoardState, san: str) -> MoveRecord:
    """Resolve SAN text to a legal move record; check markers are optional."""
    key = _strip_suffix(san.strip()).replace("0-0-0", "O-O-O").replace("0-0", "O-O")
    if not key or not SAN_PATTERN.match(key):
        raise IllegalMoveError(san, fen=serialize_fen(board))
    for record in legal_moves(board):
        if _strip_suffix(record.san) == key:
            return record
    raise IllegalMoveError(san, fen=serialize_fen(board))


def parse_uci(board: BoardState, text: str) -> MoveRecord:
    """Convert long algebraic (``e2e4``, ``e7e8q``) to a legal move record."""
    text = text.strip()
    if not re.fullmatch(r"[a-h][1-8][a-h][1-8][qrbnQRBN]?", text):
        raise IllegalMoveError(text, fen=serialize_fen(board))
    move = Move(parse_square(text[:2]), parse_square(text[2:4]), text[4].upper() if len(text) == 5 else None)
    for record in legal_moves(board):
        if record.move == move:
            return record
    raise IllegalMoveError(text, fen=serialize_fen(board))


def apply_move(board: BoardState, move: MoveRecord | Move | str) -> BoardState:
    """Play a legal move. Strings are read as SAN."""
    if isinstance(move, str):
        move = parse_san(board, move)
    bare = move.move if isinstance(move, MoveRecord) else move
    if bare not in legal_move_list(board):
        label = move.san if isinstance(move, MoveRecord) else bare.uci()
        raise IllegalMoveError(label, fen=serialize_fen(board))
    return _make(board, bare)


def pgn_to_fen(moves: Sequence[str], start: BoardState | None = None) -> BoardState:
    board = start or initial_board()
    for i, san in enumerate(moves):
        try:
            board = _make(board, parse_san(board, san).move)
        except IllegalMoveError:
            raise IllegalMoveError(san, index=i, fen=serialize_fen(board)) from None
    return board


def perft(board: BoardState, depth: int) -> int:
    if depth == 0:
        return 1
    moves = legal_move_list(board)
    if depth == 1:
        return len(moves)
    return sum(perft(_make(board, m), depth - 1) for m in moves)


# ---------------------------------------------------------------------------
# history, repetition and game end


def _ep_available(board: BoardState) -> bool:
    if board.en_passant is None:
        return False
    for move in legal_move_list(board):
        if move.to_sq == board.en_passant and board.placement[move.from_sq] in ("P", "p"):
            return True
    return False


def position_key(board: BoardState) -> tuple:
    """Identity for repetition: placement, side, rights and *capturable* en passant."""
    ep = board.en_passant if _ep_available(board) else None
    return (board.placement, board.side_to_move, board.castling, ep)


@dataclass(frozen=True)
class GameHistory:
    start: BoardState
    moves: tuple[MoveRecord, ...] = ()
    position_keys: tuple = ()
    board: BoardState = field(default=None, compare=False)  # type: ignore[assignment]

    def __post_init__(self):
        if self.board is None:
            object.__setattr__(self, "board", self.start)
        if not self.position_keys:
            object.__setattr__(self, "position_keys", (position_key(self.start),))
        if len(self.position_keys) != len(self.moves) + 1:
            raise ChessError("position_keys must have len(moves) + 1 entries")

    @classmethod
    def new(cls, start: BoardState | None = None) -> GameHistory:
        return cls(start or initial_board())

    def push(self, move: MoveRecord | str) -> GameHistory:
        if isinstance(move, str):
            move = parse_san(self.board, move)
        nxt = apply_move(self.board, move)
        return GameHistory(self.start, self.moves + (move,), self.position_keys + (position_key(nxt),), nxt)

    @property
    def sans(self) -> list[str]:
        return [m.san for m in self.moves]


def repetition_count(history: GameHistory) -> int:
    return history.position_keys.count(history.position_keys[-1])


def insufficient_material(board: BoardState) -> bool:
    pieces = [(sq, x) for sq, x in enumerate(board.placement) if x is not None and x not in "Kk"]
    if not pieces:
        return True
    if len(pieces) == 1 and pieces[0][1] in "NBnb":
        return True
    if all(x in "Bb" for _, x in pieces):
        shades = {((sq & 7) + (sq >> 3)) % 2 for sq, _ in pieces}
        return len(shades) == 1
    return False


def game_status(history: GameHistory) -> tuple[str, str] | None:
    """``(result, reason)`` if the game is over by rule, else ``None``.

    result is ``"1-0"``, ``"0-1"`` or ``"1/2-1/2"``.
    """
    board = history.board
    if not has_legal_move(board):
        if in_check(board):
            return ("0-1" if board.side_to_move == WHITE else "1-0"), "checkmate"
        return "1/2-1/2", "stalemate"
    if repetition_count(history) >= 3:
        return "1/2-1/2", "threefold"
    if board.halfmove_clock >= 100:
        return "1/2-1/2", "fifty-move"
    if insufficient_material(board):
        return "1/2-1/2", "insufficient material"
    return None


def material_balance(board: BoardState) -> int:
    """White material minus Black material in pawn units."""
    total = 0
    for x in board.placement:
        if x is not None:
            v = PIECE_VALUES[x.upper()]
            total += v if x.isupper() else -v
    return total


# ---------------------------------------------------------------------------
# PGN movetext

_RESULTS = ("1-0", "0-1", "1/2-1/2", "*")


def render_movetext(sans: Sequence[str], start_fullmove: int = 1, black_first: bool = False) -> str:
    parts = []
    num = start_fullmove
    for i, san in enumerate(sans):
        white_turn = (i % 2 == 0) != black_first
        if white_turn:
            parts.append(f"{num}. {san}")
        else:
            if i == 0:
                parts.append(f"{num}... {san}")
            else:
                parts.append(san)
            num += 1
    return " ".join(parts)


def _strip_nested(text: str, open_ch: str, close_ch: str) -> str:
    out, depth = [], 0
    for ch in text:
        if ch == open_ch:
            depth += 1
        elif ch == close_ch and depth:
            depth -= 1
        elif not depth:
            out.append(ch)
    return "".join(out)


def movetext_sans(text: str) -> tuple[list[str], str | None]:
    """Extract SAN tokens and the result token from PGN movetext."""
    text = re.sub(r"\{[^}]*\}", " ", text)
    text = re.sub(r";[^\n]*", " ", text)
    text = _strip_nested(text, "(", ")")
    sans, result = [], None
    for tok in text.split():
        tok = re.sub(r"^\d+\.(\.\.)?", "", tok)
        if not tok or tok.startswith("$"):
            continue
        if tok in _RESULTS:
            result = tok
            continue
        sans.append(tok)
    return sans, result


@dataclass
class PgnGame:
    headers: dict[str, str]
    moves: list[str]
    result: str | None = None


def parse_pgn(text: str) -> list[PgnGame]:
    """Split a PGN file into games; headers are kept but optional."""
    games: list[PgnGame] = []
    headers: dict[str, str] = {}
    body: list[str] = []

    def flush():
        if headers or any(line.strip() for line in body):
            sans, result = movetext_sans(" ".join(body))
            games.append(PgnGame(dict(headers), sans, result))
        headers.clear()
        body.clear()

    for line in text.splitlines():
        stripped = line.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            if any(b.strip() for b in body):
                flush()
            m = re.match(r'\[(\w+)\s+"(.*)"\]', stripped)
            if m:
                headers[m.group(1)] = m.group(2)
        elif not stripped:
            if any(b.strip() for b in body):
                flush()
        else:
            body.append(stripped)
    flush()
    return games


def render_pgn(moves: Sequence[str], result: str = "*", headers: dict[str, str] | None = None) -> str:
    lines = [f'[{k} "{v}"]' for k, v in (headers or {}).items()]
    if lines:
        lines.append("")
    movetext = render_movetext(moves)
    lines.append(f"{movetext} {result}".strip())
    return "\n".join(lines)


def random_game(rng, plies: int, start: BoardState | None = None) -> list[BoardState]:
    """Boards visited by a uniformly random legal game (stops early at game end)."""
    board = start or initial_board()
    boards = [board]
    for _ in range(plies):
        moves = legal_move_list(board)
        if not moves:
            break
        board = _make(board, moves[rng.randrange(len(moves))])
        boards.append(board)
    return boards
