"""A deliberately naive move generator used only as a perft oracle.

Shares no code with chessmask.board. The board is a dict of (file, rank) ->
piece letter. Legality is checked by making the move and asking whether any
opponent pseudo-move could capture the king.
"""

KNIGHT = [(1, 2), (2, 1), (2, -1), (1, -2), (-1, -2), (-2, -1), (-2, 1), (-1, 2)]
KING = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)]
ROOK = [(1, 0), (-1, 0), (0, 1), (0, -1)]
BISHOP = [(1, 1), (1, -1), (-1, 1), (-1, -1)]


def load(fen):
    fields = fen.split()
    board = {}
    for r, row in enumerate(fields[0].split("/")):
        f = 0
        for ch in row:
            if ch.isdigit():
                f += int(ch)
            else:
                board[(f, 7 - r)] = ch
                f += 1
    ep = None
    if fields[3] != "-":
        ep = ("abcdefgh".index(fields[3][0]), int(fields[3][1]) - 1)
    return board, fields[1], fields[2].replace("-", ""), ep


def white(p):
    return p.isupper()


def on(f, r):
    return 0 <= f < 8 and 0 <= r < 8


def attacked(board, sq, by_white):
    """Is square ``sq`` attacked by the side ``by_white``? Looks outward from sq."""
    f, r = sq
    for df, dr in KNIGHT:
        p = board.get((f + df, r + dr))
        if p and white(p) == by_white and p.upper() == "N":
            return True
    for df, dr in KING:
        p = board.get((f + df, r + dr))
        if p and white(p) == by_white and p.upper() == "K":
            return True
    pawn_dir = -1 if by_white else 1
    for df in (-1, 1):
        p = board.get((f + df, r + pawn_dir))
        if p and white(p) == by_white and p.upper() == "P":
            return True
    for dirs, kinds in ((ROOK, "RQ"), (BISHOP, "BQ")):
        for df, dr in dirs:
            x, y = f + df, r + dr
            while on(x, y):
                p = board.get((x, y))
                if p:
                    if white(p) == by_white and p.upper() in kinds:
                        return True
                    break
                x, y = x + df, y + dr
    return False


def moves(state):
    """Legal successor states."""
    board, side, castling, ep = state
    me = side == "w"
    out = []

    def push(frm, to, promo=None, ep_capture=None, rook_move=None, new_ep=None):
        b = dict(board)
        piece = b.pop(frm)
        if ep_capture:
            del b[ep_capture]
        if rook_move:
            b[rook_move[1]] = b.pop(rook_move[0])
        b[to] = promo or piece
        king = next(s for s, p in b.items() if p == ("K" if me else "k"))
        if attacked(b, king, not me):
            return
        rights = castling
        for sq, lost in (((4, 0), "KQ"), ((4, 7), "kq"), ((0, 0), "Q"), ((7, 0), "K"), ((0, 7), "q"), ((7, 7), "k")):
            if frm == sq or to == sq:
                rights = "".join(c for c in rights if c not in lost)
        out.append((b, "b" if me else "w", rights, new_ep))

    for (f, r), p in list(board.items()):
        if white(p) != me:
            continue
        kind = p.upper()
        if kind == "P":
            d = 1 if me else -1
            start, last = (1, 7) if me else (6, 0)
            promos = "QRBN" if me else "qrbn"
            one = (f, r + d)
            if on(*one) and one not in board:
                if one[1] == last:
                    for q in promos:
                        push((f, r), one, q)
                else:
                    push((f, r), one)
                    two = (f, r + 2 * d)
                    if r == start and two not in board:
                        push((f, r), two, new_ep=(f, r + d))
            for df in (-1, 1):
                t = (f + df, r + d)
                if not on(*t):
                    continue
                q = board.get(t)
                if q and white(q) != me:
                    if t[1] == last:
                        for pr in promos:
                            push((f, r), t, pr)
                    else:
                        push((f, r), t)
                elif t == ep:
                    push((f, r), t, ep_capture=(t[0], r))
        elif kind in "NK":
            for df, dr in KNIGHT if kind == "N" else KING:
                t = (f + df, r + dr)
                q = board.get(t)
                if on(*t) and (q is None or white(q) != me):
                    push((f, r), t)
        else:
            dirs = {"R": ROOK, "B": BISHOP, "Q": ROOK + BISHOP}[kind]
            for df, dr in dirs:
                x, y = f + df, r + dr
                while on(x, y):
                    q = board.get((x, y))
                    if q is None or white(q) != me:
                        push((f, r), (x, y))
                    if q:
                        break
                    x, y = x + df, y + dr
    # castling
    rank = 0 if me else 7
    king_char, rook_char = ("K", "R") if me else ("k", "r")
    if board.get((4, rank)) == king_char and not attacked(board, (4, rank), not me):
        short, long_ = ("K", "Q") if me else ("k", "q")
        if short in castling and board.get((7, rank)) == rook_char:
            if all((x, rank) not in board for x in (5, 6)) and not attacked(board, (5, rank), not me):
                push((4, rank), (6, rank), rook_move=((7, rank), (5, rank)))
        if long_ in castling and board.get((0, rank)) == rook_char:
            if all((x, rank) not in board for x in (1, 2, 3)) and not attacked(board, (3, rank), not me):
                push((4, rank), (2, rank), rook_move=((0, rank), (3, rank)))
    return out


def perft(state, depth):
    if depth == 0:
        return 1
    children = moves(state)
    if depth == 1:
        return len(children)
    return sum(perft(c, depth - 1) for c in children)
