#include "visvar/text.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace visvar::text {

namespace {
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }
}  // namespace

std::string normalize_ws(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : s) {
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(c);
    }
    return out;
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), lower);
    return out;
}

std::vector<std::string> split_lines(std::string_view s) {
    std::vector<std::string> lines;
    size_t start = 0;
    while (start <= s.size()) {
        size_t end = s.find('\n', start);
        if (end == std::string_view::npos) end = s.size();
        std::string_view line = s.substr(start, end - start);
        size_t a = 0, b = line.size();
        while (a < b && is_space(line[a])) ++a;
        while (b > a && is_space(line[b - 1])) --b;
        if (b > a) lines.emplace_back(line.substr(a, b - a));
        if (end == s.size()) break;
        start = end + 1;
    }
    return lines;
}

std::vector<std::string> split_words(std::string_view s) {
    std::vector<std::string> words;
    std::string cur;
    for (char c : s) {
        if (is_space(c)) {
            if (!cur.empty()) {
                words.push_back(cur);
                cur.clear();
            }
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) words.push_back(cur);
    return words;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::string first_alpha_token(std::string_view s) {
    size_t i = 0;
    while (i < s.size() && !is_alpha(s[i])) ++i;
    size_t j = i;
    while (j < s.size() && is_alpha(s[j])) ++j;
    return to_lower(s.substr(i, j - i));
}

namespace {
// Positions of whole-word matches of `word` in `s`, case-insensitive.
std::vector<size_t> whole_word_positions(std::string_view s, std::string_view word) {
    std::vector<size_t> positions;
    if (word.empty()) return positions;
    const std::string ls = to_lower(s);
    const std::string lw = to_lower(word);
    size_t pos = 0;
    while ((pos = ls.find(lw, pos)) != std::string::npos) {
        const bool left_ok = pos == 0 || !is_word_char(ls[pos - 1]);
        const size_t end = pos + lw.size();
        const bool right_ok = end == ls.size() || !is_word_char(ls[end]);
        if (left_ok && right_ok) positions.push_back(pos);
        pos += 1;
    }
    return positions;
}
}  // namespace

int count_whole_word(std::string_view s, std::string_view word) {
    return static_cast<int>(whole_word_positions(s, word).size());
}

std::optional<std::string> replace_whole_word_once(std::string_view s, std::string_view word,
                                                   std::string_view replacement) {
    auto positions = whole_word_positions(s, word);
    if (positions.size() != 1) return std::nullopt;
    std::string out(s);
    out.replace(positions[0], word.size(), replacement);
    return out;
}

int round_half_up(double x) { return static_cast<int>(std::floor(x + 0.5)); }

}  // namespace visvar::text
