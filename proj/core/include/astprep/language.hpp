#pragma once

#include <filesystem>
#include <optional>
#include <string_view>

namespace astprep {

enum class Language {
    Python,
    Java,
    C,
    Cpp,
    CSharp,
    Markdown,
    ReStructuredText,
    /// Built-in indentation-structured toy language (".toy"), parsed without
    /// any grammar asset.
    Toy,
};

/// Code files are parsed and corrupted by subtree; text files are not.
bool is_code(Language lang) noexcept;

/// Stable lowercase tag used in records and on the command line.
std::string_view language_name(Language lang) noexcept;
std::optional<Language> language_from_name(std::string_view name) noexcept;

/// Default extension routing: .py .java .c/.h .cpp/.hpp/.cc/.cxx/.hh .cs .md .rst .toy
std::optional<Language> language_for_extension(std::string_view ext) noexcept;
inline std::optional<Language> language_for_path(const std::filesystem::path& p) {
    return language_for_extension(p.extension().string());
}

}  // namespace astprep
