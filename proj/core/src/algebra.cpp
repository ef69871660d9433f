#include "stgen/algebra.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace stgen {

std::vector<std::int64_t> TensorAccess::index_of(std::span<const std::int64_t> x) const {
  auto idx = access * x;
  for (std::size_t d = 0; d < idx.size() && d < offsets.size(); ++d) idx[d] += offsets[d];
  return idx;
}

std::size_t TensorAlgebra::iterator_index(std::string_view n) const {
  for (std::size_t i = 0; i < iterators.size(); ++i)
    if (iterators[i].name == n) return i;
  throw std::out_of_range("unknown iterator '" + std::string(n) + "'");
}

bool TensorAlgebra::has_iterator(std::string_view n) const {
  return std::any_of(iterators.begin(), iterators.end(), [&](const Iterator& it) { return it.name == n; });
}

std::vector<const TensorAccess*> TensorAlgebra::tensors() const {
  std::vector<const TensorAccess*> out;
  for (const auto& in : inputs) out.push_back(&in);
  out.push_back(&output);
  return out;
}

std::vector<std::int64_t> TensorAlgebra::extents(const TensorAccess& a) const {
  std::vector<std::int64_t> ext(a.rank(), 0);
  for (std::size_t d = 0; d < a.rank(); ++d) {
    std::int64_t hi = d < a.offsets.size() ? a.offsets[d] : 0;
    for (std::size_t j = 0; j < iterators.size(); ++j) {
      const auto c = a.access(d, j);
      if (c > 0) hi += c * (iterators[j].bound - 1);
    }
    ext[d] = hi + 1;
  }
  return ext;
}

std::int64_t TensorAlgebra::volume() const {
  std::int64_t v = 1;
  for (const auto& it : iterators) v *= it.bound;
  return v;
}

bool TensorAlgebra::has_index_sums() const {
  for (const auto* t : tensors())
    for (std::size_t d = 0; d < t->rank(); ++d) {
      int nonzero = 0;
      for (auto c : t->access.row(d)) nonzero += c != 0;
      if (nonzero > 1) return true;
    }
  return false;
}

ParseError::ParseError(const std::string& message, std::size_t line, std::size_t column)
    : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + message),
      line_(line),
      column_(column) {}

namespace {

enum class Tok { Ident, Int, LBracket, RBracket, Comma, Plus, PlusEq, Star, Semi, Eq, Colon, End };

struct Token {
  Tok kind;
  std::string text;
  std::size_t line;
  std::size_t column;
};

const char* describe(Tok t) {
  switch (t) {
    case Tok::Ident: return "identifier";
    case Tok::Int: return "integer";
    case Tok::LBracket: return "'['";
    case Tok::RBracket: return "']'";
    case Tok::Comma: return "','";
    case Tok::Plus: return "'+'";
    case Tok::PlusEq: return "'+='";
    case Tok::Star: return "'*'";
    case Tok::Semi: return "';'";
    case Tok::Eq: return "'='";
    case Tok::Colon: return "':'";
    case Tok::End: return "end of input";
  }
  return "?";
}

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  std::size_t line = 1, col = 1, i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k, ++i) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  while (i < src.size()) {
    const char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (c == '#') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    const std::size_t l = line, co = col;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_' || src[j] == '-'))
        ++j;
      out.push_back({Tok::Ident, std::string(src.substr(i, j - i)), l, co});
      advance(j - i);
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      out.push_back({Tok::Int, std::string(src.substr(i, j - i)), l, co});
      advance(j - i);
      continue;
    }
    Tok kind;
    std::size_t len = 1;
    switch (c) {
      case '[': kind = Tok::LBracket; break;
      case ']': kind = Tok::RBracket; break;
      case ',': kind = Tok::Comma; break;
      case '*': kind = Tok::Star; break;
      case ';': kind = Tok::Semi; break;
      case '=': kind = Tok::Eq; break;
      case ':': kind = Tok::Colon; break;
      case '+':
        if (i + 1 < src.size() && src[i + 1] == '=') {
          kind = Tok::PlusEq;
          len = 2;
        } else {
          kind = Tok::Plus;
        }
        break;
      default:
        throw ParseError(std::string("unexpected character '") + c + "'", l, co);
    }
    out.push_back({kind, std::string(src.substr(i, len)), l, co});
    advance(len);
  }
  out.push_back({Tok::End, "", line, col});
  return out;
}

struct RawAccess {
  Token tensor;
  std::vector<std::vector<Token>> dims;  // iterator tokens summed per dimension
};

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  TensorAlgebra parse() {
    TensorAlgebra algebra;
    if (peek().kind == Tok::Ident && peek(1).kind == Tok::Colon) {
      algebra.name = take().text;
      take();
    }
    RawAccess out = access();
    expect(Tok::PlusEq);
    std::vector<RawAccess> ins;
    ins.push_back(access());
    while (peek().kind == Tok::Star) {
      take();
      ins.push_back(access());
    }
    if (ins.size() > 3) throw error_at(ins[3].tensor, "at most three input tensors are supported");
    expect(Tok::Semi);

    std::map<std::string, std::size_t> seen;
    while (peek().kind == Tok::Ident) {
      const Token name = take();
      expect(Tok::Eq);
      const Token value = expect(Tok::Int);
      if (seen.count(name.text)) throw error_at(name, "iterator '" + name.text + "' declared twice");
      std::int64_t bound = 0;
      try {
        bound = std::stoll(value.text);
      } catch (const std::exception&) {
        throw error_at(value, "bound out of range");
      }
      if (bound < 1) throw error_at(value, "bound of '" + name.text + "' must be >= 1");
      seen[name.text] = algebra.iterators.size();
      algebra.iterators.push_back({name.text, bound});
    }
    if (peek().kind != Tok::End) throw unexpected(peek(), "iterator bound or end of input");
    if (algebra.iterators.empty()) throw error_at(peek(), "missing iterator bounds");

    std::map<std::string, std::pair<std::size_t, Token>> ranks;
    auto resolve = [&](const RawAccess& raw) {
      auto [it, inserted] = ranks.try_emplace(raw.tensor.text, raw.dims.size(), raw.tensor);
      if (!inserted && it->second.first != raw.dims.size())
        throw error_at(raw.tensor, "tensor '" + raw.tensor.text + "' used with " + std::to_string(raw.dims.size()) +
                                       " dimensions, previously " + std::to_string(it->second.first));
      TensorAccess acc;
      acc.tensor = raw.tensor.text;
      acc.access = IntMatrix(raw.dims.size(), algebra.iterators.size());
      acc.offsets.assign(raw.dims.size(), 0);
      for (std::size_t d = 0; d < raw.dims.size(); ++d)
        for (const Token& term : raw.dims[d]) {
          auto found = seen.find(term.text);
          if (found == seen.end()) throw error_at(term, "unknown iterator '" + term.text + "'");
          auto& coef = acc.access(d, found->second);
          if (coef != 0) throw error_at(term, "iterator '" + term.text + "' repeated in one index expression");
          coef = 1;
        }
      return acc;
    };
    algebra.output = resolve(out);
    for (const auto& in : ins) {
      if (in.tensor.text == out.tensor.text)
        throw error_at(in.tensor, "output tensor '" + out.tensor.text + "' cannot also be an input");
      algebra.inputs.push_back(resolve(in));
    }
    for (std::size_t j = 0; j < algebra.iterators.size(); ++j) {
      bool in_output = false;
      for (std::size_t d = 0; d < algebra.output.rank(); ++d) in_output |= algebra.output.access(d, j) != 0;
      if (!in_output) algebra.reduction_iterators.push_back(algebra.iterators[j].name);
    }
    return algebra;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const { return toks_[std::min(pos_ + ahead, toks_.size() - 1)]; }
  Token take() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

  Token expect(Tok kind) {
    if (peek().kind != kind) throw unexpected(peek(), describe(kind));
    return take();
  }

  static ParseError error_at(const Token& t, const std::string& msg) { return ParseError(msg, t.line, t.column); }

  static ParseError unexpected(const Token& t, const std::string& wanted) {
    const std::string found = t.kind == Tok::End ? "end of input" : "'" + t.text + "'";
    return ParseError("expected " + wanted + ", found " + found, t.line, t.column);
  }

  RawAccess access() {
    RawAccess raw{expect(Tok::Ident), {}};
    expect(Tok::LBracket);
    do {
      std::vector<Token> terms{expect(Tok::Ident)};
      while (peek().kind == Tok::Plus) {
        take();
        terms.push_back(expect(Tok::Ident));
      }
      raw.dims.push_back(std::move(terms));
    } while (peek().kind == Tok::Comma && (take(), true));
    expect(Tok::RBracket);
    return raw;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

void render_access(std::ostringstream& os, const TensorAlgebra& a, const TensorAccess& acc) {
  os << acc.tensor << '[';
  for (std::size_t d = 0; d < acc.rank(); ++d) {
    if (d) os << ',';
    bool first = true;
    for (std::size_t j = 0; j < a.iterators.size(); ++j) {
      if (acc.access(d, j) == 0) continue;
      if (!first) os << '+';
      os << a.iterators[j].name;
      first = false;
    }
  }
  os << ']';
}

}  // namespace

TensorAlgebra parse_tensor_algebra(std::string_view source) { return Parser(lex(source)).parse(); }

TensorAlgebra load_tensor_algebra(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open algebra file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  TensorAlgebra a = parse_tensor_algebra(buf.str());
  if (a.name.empty()) a.name = std::filesystem::path(path).stem().string();
  return a;
}

std::string to_string(const TensorAlgebra& a) {
  std::ostringstream os;
  if (!a.name.empty()) os << a.name << ": ";
  render_access(os, a, a.output);
  os << " += ";
  for (std::size_t i = 0; i < a.inputs.size(); ++i) {
    if (i) os << " * ";
    render_access(os, a, a.inputs[i]);
  }
  os << ';';
  for (const auto& it : a.iterators) os << ' ' << it.name << '=' << it.bound;
  return os.str();
}

}  // namespace stgen
