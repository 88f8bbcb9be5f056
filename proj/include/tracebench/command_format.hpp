// The external command file format.
//
//   name
//   <parameter count>
//   <one description line per parameter>
//   <code lines>
//
// Commands are separated by one or more blank lines, so code cannot contain a
// blank line. Placeholders in code are exactly $PAR<k>$ with 1 <= k <= count.
#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tracebench {

class CommandFormatError : public std::runtime_error {
 public:
  CommandFormatError(const std::string& origin, std::size_t line, const std::string& message)
      : std::runtime_error(origin + ":" + std::to_string(line) + ": " + message), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct CommandBlock {
  std::string name;
  std::optional<std::string> stage;  // only for UDF files
  std::vector<std::string> param_descriptions;
  std::string code;  // lines joined by '\n', no trailing newline
  std::size_t line = 0;
};

// with_stage: expect a stage line after the name (UDF files).
std::vector<CommandBlock> parse_command_blocks(std::string_view text, const std::string& origin, bool with_stage);
std::string serialize_command_blocks(const std::vector<CommandBlock>& blocks);

// Every k of every $PAR<k>$ in text, in order of appearance.
std::vector<std::size_t> placeholder_indices(std::string_view text);

// Replaces each $PAR<k>$ with args[k-1] in a single left-to-right pass, so
// substituted text is never rescanned. Throws std::out_of_range for k outside
// 1..args.size().
std::string substitute_params(std::string_view text, const std::vector<std::string>& args);

bool is_command_name(std::string_view name);

}  // namespace tracebench
