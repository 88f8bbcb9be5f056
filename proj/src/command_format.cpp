#include "tracebench/command_format.hpp"

#include <charconv>
#include <set>

namespace tracebench {

namespace {

bool blank(std::string_view line) { return line.find_first_not_of(" \t") == std::string_view::npos; }

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

// Parses $PAR<k>$ at text[i]; returns the index and the length consumed.
std::optional<std::pair<std::size_t, std::size_t>> placeholder_at(std::string_view text, std::size_t i) {
  constexpr std::string_view prefix = "$PAR";
  if (text.substr(i, prefix.size()) != prefix) return std::nullopt;
  std::size_t j = i + prefix.size();
  const std::size_t digits_start = j;
  while (j < text.size() && text[j] >= '0' && text[j] <= '9') ++j;
  if (j == digits_start || j >= text.size() || text[j] != '$') return std::nullopt;
  std::size_t k = 0;
  auto [p, ec] = std::from_chars(text.data() + digits_start, text.data() + j, k);
  if (ec != std::errc()) return std::nullopt;
  return std::make_pair(k, j + 1 - i);
}

}  // namespace

bool is_command_name(std::string_view name) {
  if (name.empty()) return false;
  const auto alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; };
  if (!alpha(name[0])) return false;
  for (char c : name) {
    if (!alpha(c) && !(c >= '0' && c <= '9') && c != '.') return false;
  }
  return true;
}

std::vector<std::size_t> placeholder_indices(std::string_view text) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < text.size();) {
    if (auto ph = placeholder_at(text, i)) {
      out.push_back(ph->first);
      i += ph->second;
    } else {
      ++i;
    }
  }
  return out;
}

std::string substitute_params(std::string_view text, const std::vector<std::string>& args) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    if (auto ph = placeholder_at(text, i)) {
      if (ph->first < 1 || ph->first > args.size()) {
        throw std::out_of_range("placeholder $PAR" + std::to_string(ph->first) + "$ has no argument (" +
                                std::to_string(args.size()) + " given)");
      }
      out += args[ph->first - 1];
      i += ph->second;
    } else {
      out += text[i++];
    }
  }
  return out;
}

std::vector<CommandBlock> parse_command_blocks(std::string_view text, const std::string& origin, bool with_stage) {
  const auto lines = split_lines(text);
  std::vector<CommandBlock> blocks;
  std::set<std::string, std::less<>> names;
  std::size_t i = 0;
  const auto fail = [&](std::size_t line, const std::string& msg) -> void {
    throw CommandFormatError(origin, line, msg);
  };
  while (i < lines.size()) {
    if (blank(lines[i])) {
      ++i;
      continue;
    }
    CommandBlock b;
    b.line = i + 1;
    b.name = std::string(trim(lines[i]));
    if (!is_command_name(b.name)) fail(i + 1, "invalid command name '" + b.name + "'");
    ++i;
    if (with_stage) {
      if (i >= lines.size() || blank(lines[i])) fail(i + 1, "command '" + b.name + "' is missing its stage line");
      b.stage = std::string(trim(lines[i]));
      ++i;
    }
    if (i >= lines.size() || blank(lines[i])) fail(i + 1, "command '" + b.name + "' is missing its parameter count");
    const std::string_view count_text = trim(lines[i]);
    std::size_t count = 0;
    auto [p, ec] = std::from_chars(count_text.data(), count_text.data() + count_text.size(), count);
    if (ec != std::errc() || p != count_text.data() + count_text.size()) {
      fail(i + 1, "parameter count of '" + b.name + "' is not a nonnegative integer: '" + std::string(count_text) + "'");
    }
    ++i;
    for (std::size_t k = 0; k < count; ++k, ++i) {
      if (i >= lines.size()) {
        fail(i + 1, "command '" + b.name + "' declares " + std::to_string(count) + " parameters but has only " +
                        std::to_string(k) + " descriptions");
      }
      b.param_descriptions.emplace_back(trim(lines[i]));
    }
    std::vector<std::string_view> code;
    const std::size_t code_line = i + 1;
    while (i < lines.size() && !blank(lines[i])) code.push_back(lines[i++]);
    for (std::size_t k = 0; k < code.size(); ++k) {
      if (k) b.code += '\n';
      b.code += code[k];
    }
    for (std::size_t k : placeholder_indices(b.code)) {
      if (k < 1 || k > count) {
        fail(code_line, "placeholder $PAR" + std::to_string(k) + "$ in '" + b.name + "' is outside 1.." +
                            std::to_string(count));
      }
    }
    if (!names.insert(b.stage.value_or("") + "/" + b.name).second) {
      fail(b.line, "duplicate command name '" + b.name + "'");
    }
    blocks.push_back(std::move(b));
  }
  return blocks;
}

std::string serialize_command_blocks(const std::vector<CommandBlock>& blocks) {
  std::string out;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    if (i) out += '\n';
    out += b.name + '\n';
    if (b.stage) out += *b.stage + '\n';
    out += std::to_string(b.param_descriptions.size()) + '\n';
    for (const auto& d : b.param_descriptions) out += d + '\n';
    if (!b.code.empty()) out += b.code + '\n';
  }
  return out;
}

}  // namespace tracebench
