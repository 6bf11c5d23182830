#pragma once

// Line-oriented textual IR for SDK and app code.
//
//   # comment
//   sdk <group>:<artifact>:<version>
//   class <class-id>
//   method <class-id>.<name> <public|nonpublic> sig="<anon-signature>" params=r0,r1
//     <kind> [operands]
//
// Instruction lines are indented by exactly two spaces. Registers are written
// r<N>; lists of registers are comma separated. Tagged operands are api:<id>,
// callee:<method-id> and field:<id>; CONST_STRING takes one quoted literal
// with backslash escapes (\" \\ \n \t \r).

#include <algorithm>
#include <array>
#include <charconv>
#include <compare>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fpscope/coordinate.hpp"
#include "fpscope/error.hpp"

namespace fpscope::ir {

// Stand-in grouping of Dalvik opcodes into 34 kinds.
enum class InstructionKind : std::uint8_t {
  ASSIGN,
  CONST,
  CONST_STRING,
  NEW_INSTANCE,
  NEW_ARRAY,
  LOAD_INSTANCE,
  STORE_INSTANCE,
  LOAD_STATIC,
  STORE_STATIC,
  LOAD_ARRAY,
  STORE_ARRAY,
  INVOKE_VIRTUAL,
  INVOKE_STATIC,
  INVOKE_DIRECT,
  INVOKE_INTERFACE,
  INVOKE_SUPER,
  RETURN,
  RETURN_VOID,
  THROW,
  GOTO,
  IF,
  SWITCH,
  CMP,
  UNARY_OP,
  BINARY_OP,
  CAST,
  INSTANCE_OF,
  ARRAY_LENGTH,
  MONITOR_ENTER,
  MONITOR_EXIT,
  MOVE_EXCEPTION,
  MOVE_RESULT,
  NOP,
  FILL_ARRAY,
};

inline constexpr std::size_t kInstructionKindCount = 34;

namespace detail {

enum class DstRule : std::uint8_t { kNone, kRequired, kOptional };
enum class Extra : std::uint8_t { kNone, kField, kTarget, kLiteral };

struct KindInfo {
  std::string_view upper;
  std::string_view lower;
  DstRule dst;
  std::uint8_t min_srcs;
  std::uint8_t max_srcs;
  Extra extra;
};

inline constexpr std::uint8_t kAnyArity = 255;

inline constexpr std::array<KindInfo, kInstructionKindCount> kKinds{{
    {"ASSIGN", "assign", DstRule::kRequired, 1, 1, Extra::kNone},
    {"CONST", "const", DstRule::kRequired, 0, 0, Extra::kNone},
    {"CONST_STRING", "const_string", DstRule::kRequired, 0, 0, Extra::kLiteral},
    {"NEW_INSTANCE", "new_instance", DstRule::kRequired, 0, 0, Extra::kNone},
    {"NEW_ARRAY", "new_array", DstRule::kRequired, 1, 1, Extra::kNone},
    {"LOAD_INSTANCE", "load_instance", DstRule::kRequired, 1, 1, Extra::kField},
    {"STORE_INSTANCE", "store_instance", DstRule::kNone, 2, 2, Extra::kField},
    {"LOAD_STATIC", "load_static", DstRule::kRequired, 0, 0, Extra::kField},
    {"STORE_STATIC", "store_static", DstRule::kNone, 1, 1, Extra::kField},
    {"LOAD_ARRAY", "load_array", DstRule::kRequired, 2, 2, Extra::kNone},
    {"STORE_ARRAY", "store_array", DstRule::kNone, 3, 3, Extra::kNone},
    {"INVOKE_VIRTUAL", "invoke_virtual", DstRule::kOptional, 0, kAnyArity, Extra::kTarget},
    {"INVOKE_STATIC", "invoke_static", DstRule::kOptional, 0, kAnyArity, Extra::kTarget},
    {"INVOKE_DIRECT", "invoke_direct", DstRule::kOptional, 0, kAnyArity, Extra::kTarget},
    {"INVOKE_INTERFACE", "invoke_interface", DstRule::kOptional, 0, kAnyArity, Extra::kTarget},
    {"INVOKE_SUPER", "invoke_super", DstRule::kOptional, 0, kAnyArity, Extra::kTarget},
    {"RETURN", "return", DstRule::kNone, 1, 1, Extra::kNone},
    {"RETURN_VOID", "return_void", DstRule::kNone, 0, 0, Extra::kNone},
    {"THROW", "throw", DstRule::kNone, 1, 1, Extra::kNone},
    {"GOTO", "goto", DstRule::kNone, 0, 0, Extra::kNone},
    {"IF", "if", DstRule::kNone, 1, 2, Extra::kNone},
    {"SWITCH", "switch", DstRule::kNone, 1, 1, Extra::kNone},
    {"CMP", "cmp", DstRule::kRequired, 2, 2, Extra::kNone},
    {"UNARY_OP", "unary_op", DstRule::kRequired, 1, 1, Extra::kNone},
    {"BINARY_OP", "binary_op", DstRule::kRequired, 1, 2, Extra::kNone},
    {"CAST", "cast", DstRule::kRequired, 1, 1, Extra::kNone},
    {"INSTANCE_OF", "instance_of", DstRule::kRequired, 1, 1, Extra::kNone},
    {"ARRAY_LENGTH", "array_length", DstRule::kRequired, 1, 1, Extra::kNone},
    {"MONITOR_ENTER", "monitor_enter", DstRule::kNone, 1, 1, Extra::kNone},
    {"MONITOR_EXIT", "monitor_exit", DstRule::kNone, 1, 1, Extra::kNone},
    {"MOVE_EXCEPTION", "move_exception", DstRule::kRequired, 0, 0, Extra::kNone},
    {"MOVE_RESULT", "move_result", DstRule::kRequired, 1, 1, Extra::kNone},
    {"NOP", "nop", DstRule::kNone, 0, 0, Extra::kNone},
    {"FILL_ARRAY", "fill_array", DstRule::kNone, 1, 1, Extra::kNone},
}};

inline constexpr const KindInfo& info(InstructionKind k) {
  return kKinds[static_cast<std::size_t>(k)];
}

}  // namespace detail

inline constexpr std::string_view kind_name(InstructionKind k) {
  return detail::info(k).upper;
}

inline constexpr std::string_view kind_keyword(InstructionKind k) {
  return detail::info(k).lower;
}

inline std::optional<InstructionKind> kind_from_keyword(std::string_view kw) {
  for (std::size_t i = 0; i < kInstructionKindCount; ++i) {
    if (detail::kKinds[i].lower == kw) return static_cast<InstructionKind>(i);
  }
  return std::nullopt;
}

inline constexpr bool is_invoke(InstructionKind k) {
  return detail::info(k).extra == detail::Extra::kTarget;
}

inline constexpr bool is_field_access(InstructionKind k) {
  return detail::info(k).extra == detail::Extra::kField;
}

inline constexpr std::array<InstructionKind, kInstructionKindCount>
all_kinds() {
  std::array<InstructionKind, kInstructionKindCount> out{};
  for (std::size_t i = 0; i < kInstructionKindCount; ++i)
    out[i] = static_cast<InstructionKind>(i);
  return out;
}

struct Reg {
  std::uint32_t id = 0;
  auto operator<=>(const Reg&) const = default;
  bool operator==(const Reg&) const = default;
  std::string str() const { return "r" + std::to_string(id); }
};

enum class Visibility : std::uint8_t { kPublic, kNonPublic };

struct Instruction {
  InstructionKind kind = InstructionKind::NOP;
  std::optional<Reg> dst;
  std::vector<Reg> srcs;
  std::optional<std::string> api;     // external framework API (INVOKE_*)
  std::optional<std::string> callee;  // corpus method id (INVOKE_*)
  std::optional<std::string> field;   // field accesses
  std::optional<std::string> literal; // CONST_STRING

  bool operator==(const Instruction&) const = default;
};

struct MethodIR {
  std::string id;
  Visibility visibility = Visibility::kNonPublic;
  std::string anon_signature;
  std::vector<Reg> params;
  std::vector<Instruction> body;

  bool operator==(const MethodIR&) const = default;
};

struct ClassIR {
  std::string id;
  std::vector<MethodIR> methods;

  bool operator==(const ClassIR&) const = default;
};

struct SdkIR {
  SdkCoordinate coordinate;
  std::vector<ClassIR> classes;

  bool operator==(const SdkIR&) const = default;
};

enum class IrErrorKind : std::uint8_t {
  kSyntax,
  kDuplicateId,
  kUseBeforeDefinition,
  kKindMismatch,
  kInvalidSignature,
};

class IrError : public ParseError {
 public:
  IrError(IrErrorKind kind, const std::string& message, std::size_t line = 0,
          std::size_t column = 0)
      : ParseError(message, line, column), kind_(kind) {}
  IrErrorKind kind() const noexcept { return kind_; }

 private:
  IrErrorKind kind_;
};

// ---------------------------------------------------------------------------
// Signatures

inline bool is_framework_type(std::string_view name) {
  return name.starts_with("java.") || name.starts_with("javax.") ||
         name.starts_with("android.");
}

inline bool is_primitive_type(std::string_view name) {
  static constexpr std::array<std::string_view, 9> kPrims{
      "void", "boolean", "byte", "char", "short", "int", "long", "float",
      "double"};
  return std::find(kPrims.begin(), kPrims.end(), name) != kPrims.end();
}

namespace detail {

inline bool is_sig_delim(char c) {
  return c == '(' || c == ')' || c == ',' || c == '[' || c == ']' ||
         c == '-' || c == '>' || c == ' ';
}

// Calls fn(token, offset) for every type-name token of a signature.
template <typename Fn>
void for_each_sig_token(std::string_view sig, Fn&& fn) {
  std::size_t i = 0;
  while (i < sig.size()) {
    if (is_sig_delim(sig[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < sig.size() && !is_sig_delim(sig[j])) ++j;
    fn(sig.substr(i, j - i), i);
    i = j;
  }
}

}  // namespace detail

// True when the signature names only framework types, primitives and '?'.
inline bool is_anonymized(std::string_view sig) {
  bool ok = true;
  detail::for_each_sig_token(sig, [&](std::string_view tok, std::size_t) {
    if (tok != "?" && !is_framework_type(tok) && !is_primitive_type(tok))
      ok = false;
  });
  return ok;
}

// Replaces every developer-chosen type name with '?'.
inline std::string anonymize_signature(std::string_view sig) {
  std::string out;
  std::size_t last = 0;
  detail::for_each_sig_token(sig, [&](std::string_view tok, std::size_t at) {
    out.append(sig.substr(last, at - last));
    if (is_framework_type(tok) || is_primitive_type(tok))
      out.append(tok);
    else
      out.push_back('?');
    last = at + tok.size();
  });
  out.append(sig.substr(last));
  return out;
}

// ---------------------------------------------------------------------------
// Validation shared by the parser and programmatic construction

namespace detail {

inline bool valid_identifier(std::string_view id) {
  if (id.empty()) return false;
  for (char c : id) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '"' ||
        c == ',' || c == '#')
      return false;
  }
  return true;
}

inline bool valid_tagged_operand(std::string_view id) {
  if (!valid_identifier(id)) return false;
  return id.find(',') == std::string_view::npos;
}

// Returns a message when the instruction's operands do not fit its kind.
inline std::optional<std::string> shape_error(const Instruction& ins) {
  const KindInfo& k = info(ins.kind);
  const std::string name(k.lower);
  switch (k.dst) {
    case DstRule::kRequired:
      if (!ins.dst) return name + " requires a destination register";
      break;
    case DstRule::kNone:
      if (ins.dst) return name + " takes no destination register";
      break;
    case DstRule::kOptional:
      break;
  }
  if (ins.srcs.size() < k.min_srcs ||
      (k.max_srcs != kAnyArity && ins.srcs.size() > k.max_srcs)) {
    return name + " takes " + std::to_string(k.min_srcs) +
           (k.min_srcs == k.max_srcs
                ? std::string()
                : ".." + (k.max_srcs == kAnyArity ? std::string("n")
                                                  : std::to_string(k.max_srcs))) +
           " source register(s), got " + std::to_string(ins.srcs.size());
  }
  const bool wants_field = k.extra == Extra::kField;
  const bool wants_target = k.extra == Extra::kTarget;
  const bool wants_literal = k.extra == Extra::kLiteral;
  if (ins.field.has_value() != wants_field)
    return wants_field ? name + " requires a field:<id> operand"
                       : name + " does not take a field operand";
  if (wants_target) {
    if (ins.api.has_value() == ins.callee.has_value())
      return name + " requires exactly one of api:<id> or callee:<method-id>";
  } else if (ins.api || ins.callee) {
    return name + " does not take an api/callee operand";
  }
  if (ins.literal.has_value() != wants_literal)
    return wants_literal ? name + " requires a string literal"
                         : name + " does not take a string literal";
  if (ins.field && !valid_tagged_operand(*ins.field))
    return "invalid field identifier";
  if (ins.api && !valid_tagged_operand(*ins.api))
    return "invalid api identifier";
  if (ins.callee && !valid_tagged_operand(*ins.callee))
    return "invalid callee identifier";
  return std::nullopt;
}

}  // namespace detail

// Validates every invariant of a programmatically built SdkIR.
inline void validate(const SdkIR& sdk) {
  if (!SdkCoordinate::valid_field(sdk.coordinate.group) ||
      !SdkCoordinate::valid_field(sdk.coordinate.artifact) ||
      !SdkCoordinate::valid_field(sdk.coordinate.version))
    throw IrError(IrErrorKind::kSyntax, "invalid SDK coordinate");
  std::set<std::string_view> class_ids;
  for (const ClassIR& cls : sdk.classes) {
    if (!detail::valid_identifier(cls.id))
      throw IrError(IrErrorKind::kSyntax, "invalid class id '" + cls.id + "'");
    if (!class_ids.insert(cls.id).second)
      throw IrError(IrErrorKind::kDuplicateId, "duplicate class id '" + cls.id + "'");
    std::set<std::string_view> method_ids;
    for (const MethodIR& m : cls.methods) {
      if (!detail::valid_identifier(m.id) || !m.id.starts_with(cls.id + ".") ||
          m.id.size() == cls.id.size() + 1)
        throw IrError(IrErrorKind::kSyntax,
                      "method id '" + m.id + "' is not qualified by class '" +
                          cls.id + "'");
      if (!method_ids.insert(m.id).second)
        throw IrError(IrErrorKind::kDuplicateId, "duplicate method id '" + m.id + "'");
      if (!is_anonymized(m.anon_signature))
        throw IrError(IrErrorKind::kInvalidSignature,
                      "signature of '" + m.id + "' names a developer type");
      std::set<Reg> defined;
      for (Reg p : m.params) {
        if (!defined.insert(p).second)
          throw IrError(IrErrorKind::kDuplicateId,
                        "duplicate parameter " + p.str() + " in '" + m.id + "'");
      }
      for (const Instruction& ins : m.body) {
        if (auto err = detail::shape_error(ins))
          throw IrError(IrErrorKind::kKindMismatch, *err + " in '" + m.id + "'");
        if (ins.literal && ins.literal->find('\0') != std::string::npos)
          throw IrError(IrErrorKind::kSyntax, "NUL byte in string literal");
        for (Reg r : ins.srcs) {
          if (!defined.contains(r))
            throw IrError(IrErrorKind::kUseBeforeDefinition,
                          "register " + r.str() + " used before definition in '" +
                              m.id + "'");
        }
        if (ins.dst) defined.insert(*ins.dst);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

struct Token {
  std::string prefix;  // text before an opening quote, or the whole token
  std::string value;   // decoded quoted payload
  bool quoted = false;
  std::size_t column = 0;  // 1-based
};

inline std::vector<Token> tokenize(std::string_view line, std::size_t lineno) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    if (line[i] == ' ') {
      ++i;
      continue;
    }
    if (line[i] == '\t')
      throw IrError(IrErrorKind::kSyntax, "tab character not allowed", lineno, i + 1);
    Token tok;
    tok.column = i + 1;
    while (i < line.size() && line[i] != ' ' && line[i] != '"') {
      if (line[i] == '\t')
        throw IrError(IrErrorKind::kSyntax, "tab character not allowed", lineno, i + 1);
      tok.prefix.push_back(line[i++]);
    }
    if (i < line.size() && line[i] == '"') {
      tok.quoted = true;
      const std::size_t open = i++;
      bool closed = false;
      while (i < line.size()) {
        const char c = line[i];
        if (c == '"') {
          closed = true;
          ++i;
          break;
        }
        if (c == '\\') {
          if (i + 1 >= line.size())
            throw IrError(IrErrorKind::kSyntax, "dangling escape", lineno, i + 1);
          const char e = line[i + 1];
          switch (e) {
            case '"': tok.value.push_back('"'); break;
            case '\\': tok.value.push_back('\\'); break;
            case 'n': tok.value.push_back('\n'); break;
            case 't': tok.value.push_back('\t'); break;
            case 'r': tok.value.push_back('\r'); break;
            default:
              throw IrError(IrErrorKind::kSyntax,
                            std::string("unknown escape \\") + e, lineno, i + 1);
          }
          i += 2;
          continue;
        }
        tok.value.push_back(c);
        ++i;
      }
      if (!closed)
        throw IrError(IrErrorKind::kSyntax, "unterminated string", lineno, open + 1);
      if (i < line.size() && line[i] != ' ')
        throw IrError(IrErrorKind::kSyntax, "unexpected character after string",
                      lineno, i + 1);
    }
    out.push_back(std::move(tok));
  }
  return out;
}

inline std::optional<Reg> parse_reg(std::string_view text) {
  if (text.size() < 2 || text[0] != 'r') return std::nullopt;
  std::uint32_t id = 0;
  const char* first = text.data() + 1;
  const char* last = text.data() + text.size();
  if (text.size() > 2 && text[1] == '0') return std::nullopt;
  auto [ptr, ec] = std::from_chars(first, last, id);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return Reg{id};
}

// Comma separated register list (possibly a single register).
inline std::optional<std::vector<Reg>> parse_reg_list(std::string_view text) {
  std::vector<Reg> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    const auto piece = text.substr(start, comma == std::string_view::npos
                                              ? std::string_view::npos
                                              : comma - start);
    auto r = parse_reg(piece);
    if (!r) return std::nullopt;
    out.push_back(*r);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  SdkIR run() {
    std::size_t pos = 0;
    while (pos <= text_.size()) {
      auto nl = text_.find('\n', pos);
      if (nl == std::string_view::npos) nl = text_.size();
      std::string_view line = text_.substr(pos, nl - pos);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      ++lineno_;
      handle_line(line);
      if (nl == text_.size()) break;
      pos = nl + 1;
    }
    if (!have_sdk_) throw IrError(IrErrorKind::kSyntax, "missing 'sdk' line", 1, 1);
    return std::move(sdk_);
  }

 private:
  [[noreturn]] void fail(IrErrorKind kind, const std::string& msg,
                         std::size_t column) const {
    throw IrError(kind, msg, lineno_, column);
  }

  void handle_line(std::string_view line) {
    const auto first = line.find_first_not_of(' ');
    if (first == std::string_view::npos) return;
    if (line[first] == '#') return;
    if (first == 0) {
      handle_header(line);
    } else if (first == 2) {
      handle_instruction(line.substr(2), 2);
    } else {
      fail(IrErrorKind::kSyntax, "instruction lines must be indented by two spaces",
           first + 1);
    }
  }

  void handle_header(std::string_view line) {
    auto toks = tokenize(line, lineno_);
    const Token& head = toks.front();
    if (head.quoted) fail(IrErrorKind::kSyntax, "unexpected string", head.column);
    if (head.prefix == "sdk") {
      if (have_sdk_) fail(IrErrorKind::kSyntax, "duplicate 'sdk' line", head.column);
      if (toks.size() != 2 || toks[1].quoted)
        fail(IrErrorKind::kSyntax, "expected: sdk <group>:<artifact>:<version>",
             head.column);
      try {
        sdk_.coordinate = SdkCoordinate::parse(toks[1].prefix);
      } catch (const ParseError& e) {
        fail(IrErrorKind::kSyntax, e.message(), toks[1].column);
      }
      have_sdk_ = true;
    } else if (head.prefix == "class") {
      require_sdk(head.column);
      if (toks.size() != 2 || toks[1].quoted || !valid_identifier(toks[1].prefix))
        fail(IrErrorKind::kSyntax, "expected: class <class-id>", head.column);
      if (!class_ids_.insert(toks[1].prefix).second)
        fail(IrErrorKind::kDuplicateId, "duplicate class id '" + toks[1].prefix + "'",
             toks[1].column);
      sdk_.classes.push_back(ClassIR{toks[1].prefix, {}});
      method_ids_.clear();
      in_method_ = false;
    } else if (head.prefix == "method") {
      handle_method(toks);
    } else {
      fail(IrErrorKind::kSyntax, "unknown directive '" + head.prefix + "'", head.column);
    }
  }

  void require_sdk(std::size_t column) const {
    if (!have_sdk_) fail(IrErrorKind::kSyntax, "'sdk' line must come first", column);
  }

  void handle_method(const std::vector<Token>& toks) {
    require_sdk(toks[0].column);
    if (sdk_.classes.empty())
      fail(IrErrorKind::kSyntax, "method outside of a class", toks[0].column);
    if (toks.size() != 5)
      fail(IrErrorKind::kSyntax,
           "expected: method <id> <public|nonpublic> sig=\"...\" params=...",
           toks[0].column);
    ClassIR& cls = sdk_.classes.back();
    MethodIR m;
    const Token& id = toks[1];
    if (id.quoted || !valid_identifier(id.prefix) ||
        !id.prefix.starts_with(cls.id + ".") || id.prefix.size() == cls.id.size() + 1)
      fail(IrErrorKind::kSyntax,
           "method id must be qualified by its class '" + cls.id + "'", id.column);
    if (!method_ids_.insert(id.prefix).second)
      fail(IrErrorKind::kDuplicateId, "duplicate method id '" + id.prefix + "'",
           id.column);
    m.id = id.prefix;
    const Token& vis = toks[2];
    if (vis.quoted) fail(IrErrorKind::kSyntax, "expected visibility", vis.column);
    if (vis.prefix == "public")
      m.visibility = Visibility::kPublic;
    else if (vis.prefix == "nonpublic")
      m.visibility = Visibility::kNonPublic;
    else
      fail(IrErrorKind::kSyntax, "visibility must be public or nonpublic", vis.column);
    const Token& sig = toks[3];
    if (!sig.quoted || sig.prefix != "sig=")
      fail(IrErrorKind::kSyntax, "expected sig=\"...\"", sig.column);
    if (!is_anonymized(sig.value))
      fail(IrErrorKind::kInvalidSignature,
           "signature names a developer-chosen type", sig.column);
    m.anon_signature = sig.value;
    const Token& params = toks[4];
    if (params.quoted || !params.prefix.starts_with("params="))
      fail(IrErrorKind::kSyntax, "expected params=r0,r1,...", params.column);
    const std::string_view list = std::string_view(params.prefix).substr(7);
    defined_.clear();
    if (!list.empty()) {
      auto regs = parse_reg_list(list);
      if (!regs) fail(IrErrorKind::kSyntax, "malformed parameter list", params.column + 7);
      for (Reg r : *regs) {
        if (!defined_.insert(r).second)
          fail(IrErrorKind::kDuplicateId, "duplicate parameter " + r.str(),
               params.column + 7);
      }
      m.params = std::move(*regs);
    }
    cls.methods.push_back(std::move(m));
    in_method_ = true;
  }

  void handle_instruction(std::string_view line, std::size_t indent) {
    if (!in_method_)
      fail(IrErrorKind::kSyntax, "instruction outside of a method", indent + 1);
    auto toks = tokenize(line, lineno_);
    for (Token& t : toks) t.column += indent;
    const Token& head = toks.front();
    auto kind = head.quoted ? std::nullopt : kind_from_keyword(head.prefix);
    if (!kind)
      fail(IrErrorKind::kSyntax, "unknown instruction kind '" + head.prefix + "'",
           head.column);
    Instruction ins;
    ins.kind = *kind;

    // Registers are split around the tagged operand for invokes: one before
    // it is the destination, everything after it is an argument.
    std::vector<std::pair<Reg, std::size_t>> before, after;
    bool seen_tag = false;
    std::size_t tag_column = 0;
    for (std::size_t i = 1; i < toks.size(); ++i) {
      const Token& t = toks[i];
      if (t.quoted) {
        if (!t.prefix.empty())
          fail(IrErrorKind::kSyntax, "unexpected quoted operand", t.column);
        if (ins.literal) fail(IrErrorKind::kSyntax, "more than one literal", t.column);
        ins.literal = t.value;
        continue;
      }
      auto tagged = [&](std::string_view tag) -> std::optional<std::string> {
        if (!t.prefix.starts_with(tag)) return std::nullopt;
        std::string v = t.prefix.substr(tag.size());
        if (!valid_tagged_operand(v))
          fail(IrErrorKind::kSyntax, "empty or invalid " + std::string(tag) + " operand",
               t.column);
        if (seen_tag) fail(IrErrorKind::kSyntax, "more than one tagged operand", t.column);
        seen_tag = true;
        tag_column = t.column;
        return v;
      };
      if (auto v = tagged("api:")) {
        ins.api = std::move(*v);
      } else if (auto v = tagged("callee:")) {
        ins.callee = std::move(*v);
      } else if (auto v = tagged("field:")) {
        ins.field = std::move(*v);
      } else {
        auto regs = parse_reg_list(t.prefix);
        if (!regs) fail(IrErrorKind::kSyntax, "bad operand '" + t.prefix + "'", t.column);
        for (Reg r : *regs) (seen_tag ? after : before).emplace_back(r, t.column);
      }
    }

    std::vector<std::pair<Reg, std::size_t>> srcs;
    const auto& k = info(ins.kind);
    if (k.dst == DstRule::kOptional) {
      if (before.size() > 1)
        fail(IrErrorKind::kKindMismatch, "invoke takes at most one destination",
             before[1].second);
      if (!before.empty()) ins.dst = before.front().first;
      srcs = std::move(after);
    } else {
      srcs = std::move(before);
      srcs.insert(srcs.end(), after.begin(), after.end());
      if (k.dst == DstRule::kRequired && !srcs.empty()) {
        ins.dst = srcs.front().first;
        srcs.erase(srcs.begin());
      }
    }
    for (const auto& [r, _] : srcs) ins.srcs.push_back(r);
    if (auto err = shape_error(ins))
      fail(IrErrorKind::kKindMismatch, *err, seen_tag ? tag_column : head.column);
    for (const auto& [r, col] : srcs) {
      if (!defined_.contains(r))
        fail(IrErrorKind::kUseBeforeDefinition,
             "register " + r.str() + " used before definition", col);
    }
    if (ins.dst) defined_.insert(*ins.dst);
    sdk_.classes.back().methods.back().body.push_back(std::move(ins));
  }

  std::string_view text_;
  std::size_t lineno_ = 0;
  SdkIR sdk_;
  bool have_sdk_ = false;
  bool in_method_ = false;
  std::set<std::string> class_ids_;
  std::set<std::string> method_ids_;
  std::set<Reg> defined_;
};

inline void append_quoted(std::string& out, std::string_view s) {
  out.push_back('"');
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(c);
    }
  }
  out.push_back('"');
}

inline void append_regs(std::string& out, const std::vector<Reg>& regs,
                        std::size_t from = 0, std::size_t to = SIZE_MAX) {
  to = std::min(to, regs.size());
  for (std::size_t i = from; i < to; ++i) {
    if (i > from) out.push_back(',');
    out += regs[i].str();
  }
}

}  // namespace detail

inline SdkIR parse_ir(std::string_view text) {
  return detail::Parser(text).run();
}

inline std::string render_instruction(const Instruction& ins) {
  using IK = InstructionKind;
  std::string out(kind_keyword(ins.kind));
  auto sp = [&] { out.push_back(' '); };
  auto dst = [&] {
    if (ins.dst) {
      sp();
      out += ins.dst->str();
    }
  };
  switch (ins.kind) {
    case IK::CONST_STRING:
      dst();
      sp();
      detail::append_quoted(out, ins.literal.value_or(""));
      break;
    case IK::LOAD_INSTANCE:
      dst();
      sp();
      detail::append_regs(out, ins.srcs);
      out += " field:" + ins.field.value_or("");
      break;
    case IK::STORE_INSTANCE:
      sp();
      detail::append_regs(out, ins.srcs, 0, 1);
      out += " field:" + ins.field.value_or("");
      sp();
      detail::append_regs(out, ins.srcs, 1);
      break;
    case IK::LOAD_STATIC:
      dst();
      out += " field:" + ins.field.value_or("");
      break;
    case IK::STORE_STATIC:
      out += " field:" + ins.field.value_or("");
      sp();
      detail::append_regs(out, ins.srcs);
      break;
    default:
      dst();
      if (is_invoke(ins.kind)) {
        out += ins.api ? " api:" + *ins.api : " callee:" + ins.callee.value_or("");
      }
      if (!ins.srcs.empty()) {
        sp();
        detail::append_regs(out, ins.srcs);
      }
  }
  return out;
}

// Canonical document; parse_ir(render_ir(s)) == s for every valid s.
inline std::string render_ir(const SdkIR& sdk) {
  std::string out = "sdk " + sdk.coordinate.str() + "\n";
  for (const ClassIR& cls : sdk.classes) {
    out += "class " + cls.id + "\n";
    for (const MethodIR& m : cls.methods) {
      out += "method " + m.id +
             (m.visibility == Visibility::kPublic ? " public" : " nonpublic") +
             " sig=";
      detail::append_quoted(out, m.anon_signature);
      out += " params=";
      detail::append_regs(out, m.params);
      out.push_back('\n');
      for (const Instruction& ins : m.body) {
        out += "  ";
        out += render_instruction(ins);
        out.push_back('\n');
      }
    }
  }
  return out;
}

// Per-kind instruction counts; always 34 buckets summing to the body length.
inline std::array<std::uint32_t, kInstructionKindCount> kind_histogram(
    const MethodIR& m) {
  std::array<std::uint32_t, kInstructionKindCount> h{};
  for (const Instruction& ins : m.body) ++h[static_cast<std::size_t>(ins.kind)];
  return h;
}

}  // namespace fpscope::ir
