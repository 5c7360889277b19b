#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace kgdial {

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

std::string trim(std::string_view s);

/// True for code points in the CJK ideograph, kana, hangul and CJK
/// punctuation / fullwidth ranges; these tokenize one character at a time.
bool is_cjk(char32_t cp);

/// Splits text into tokens: CJK characters individually, ASCII punctuation
/// individually, everything else on whitespace. Invalid UTF-8 bytes are kept
/// as single-byte tokens.
std::vector<std::string> split_tokens(std::string_view text);

/// Inverse of split_tokens up to whitespace: CJK tokens are concatenated,
/// other neighbours are separated by one space.
std::string join_tokens(const std::vector<std::string>& tokens);

/// 1-based line number of byte offset `pos` in `text`.
std::size_t line_of_offset(std::string_view text, std::size_t pos);

}  // namespace kgdial
