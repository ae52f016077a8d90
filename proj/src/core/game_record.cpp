#include <cmath>
#include <cstdio>
#include <sstream>

#include "core/error.hpp"
#include "core/go_engine.hpp"

namespace qzero::go {

namespace {

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

}  // namespace

GameState replay(const GameRecord& record) {
    GameState s = new_game(record.config);
    for (size_t i = 0; i < record.moves.size(); ++i) {
        const MoveError err = play(s, record.moves[i]);
        if (err != MoveError::None) {
            fail(ErrorCode::IllegalMove, "record move " + std::to_string(i + 1) + " (" + std::to_string(record.moves[i]) +
                                             ") is illegal: " + to_string(err));
        }
    }
    return s;
}

std::string to_sgf(const GameRecord& record) {
    const GameState final_state = replay(record);
    const int n = record.config.size;
    std::ostringstream os;
    os << "(;FF[4]GM[1]SZ[" << n << "]KM[" << format_number(record.config.komi) << "]RU[Chinese]";
    if (final_state.terminal) {
        const double sc = score(final_state).score;
        if (sc > 0) {
            os << "RE[B+" << format_number(sc) << "]";
        } else if (sc < 0) {
            os << "RE[W+" << format_number(-sc) << "]";
        } else {
            os << "RE[0]";
        }
    }
    Stone mover = Stone::Black;
    for (int a : record.moves) {
        os << ';' << (mover == Stone::Black ? 'B' : 'W') << '[';
        if (a != n * n) {
            os << static_cast<char>('a' + a % n) << static_cast<char>('a' + a / n);
        }
        os << ']';
        mover = opponent(mover);
    }
    os << ")\n";
    return os.str();
}

std::string format_record(const GameRecord& record) {
    std::ostringstream os;
    os << "size " << record.config.size << "\n";
    os << "komi " << format_number(record.config.komi) << "\n";
    os << "max_moves " << record.config.move_cap() << "\n";
    os << "moves";
    for (int a : record.moves) os << ' ' << a;
    os << "\n";
    return os.str();
}

GameRecord parse_record(const std::string& text) {
    GameRecord rec;
    std::istringstream is(text);
    std::string line;
    bool have_size = false;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key) || key[0] == '#') continue;
        if (key == "size") {
            if (!(ls >> rec.config.size)) fail(ErrorCode::Corrupt, "game record: bad size line");
            have_size = true;
        } else if (key == "komi") {
            if (!(ls >> rec.config.komi)) fail(ErrorCode::Corrupt, "game record: bad komi line");
        } else if (key == "max_moves") {
            if (!(ls >> rec.config.max_moves)) fail(ErrorCode::Corrupt, "game record: bad max_moves line");
        } else if (key == "moves") {
            int a;
            while (ls >> a) rec.moves.push_back(a);
            if (!ls.eof()) fail(ErrorCode::Corrupt, "game record: non-integer move");
        } else {
            fail(ErrorCode::Corrupt, "game record: unknown key '" + key + "'");
        }
    }
    if (!have_size) fail(ErrorCode::Corrupt, "game record: missing size");
    rec.config.allow_integer_komi = rec.config.komi == std::floor(rec.config.komi);
    rec.config.validate();
    return rec;
}

}  // namespace qzero::go
