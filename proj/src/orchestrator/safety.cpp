#include <algorithm>
#include <array>
#include <regex>

#include "wrangle/orchestrator.hpp"

namespace wrangle {
namespace {

constexpr std::array kDeniedModules = {
    "os",        "sys",        "subprocess", "socket",   "shutil",  "pathlib",
    "requests",  "urllib",     "http",       "ftplib",   "smtplib", "telnetlib",
    "ctypes",    "cffi",       "multiprocessing", "threading", "concurrent", "signal",
    "pickle",    "marshal",    "shelve",     "importlib", "builtins", "io",
    "tempfile",  "glob",       "asyncio",    "pty",      "fcntl",   "resource",
    "code",      "codeop",     "inspect",    "gc",       "sqlite3", "webbrowser",
    "platform",  "selectors",  "select",     "mmap",     "zipimport", "runpy"};

constexpr std::array kDeniedCalls = {"eval",    "exec",   "compile", "__import__", "open",
                                     "globals", "locals", "vars",    "getattr",    "setattr",
                                     "delattr", "breakpoint", "input", "memoryview"};

constexpr std::array kDeniedAttributes = {"__class__",   "__subclasses__", "__globals__",
                                          "__builtins__", "__bases__",     "__base__",
                                          "__mro__",     "__dict__",       "__code__",
                                          "__closure__", "__loader__",     "__spec__",
                                          "__getattribute__", "__reduce__", "__frame__",
                                          "f_globals",   "gi_frame",       "co_code"};

bool denied_module(std::string_view dotted) {
  const auto root = dotted.substr(0, dotted.find('.'));
  for (const char* m : kDeniedModules) {
    if (root == m) return true;
  }
  return false;
}

}  // namespace

SafetyVerdict safety_scan(std::string_view source) {
  const std::string text(source);

  static const std::regex import_line(R"((?:^|[\n;])[ \t]*(?:import[ \t]+([^\n;#]+)|from[ \t]+([A-Za-z_][\w.]*)[ \t]+import))");
  for (auto it = std::sregex_iterator(text.begin(), text.end(), import_line);
       it != std::sregex_iterator(); ++it) {
    if ((*it)[2].matched) {
      if (denied_module((*it)[2].str())) return {false, "import of module '" + (*it)[2].str() + "'"};
      continue;
    }
    // "import a as b, c.d" -> a, c.d
    const std::string list = (*it)[1].str();
    std::size_t pos = 0;
    while (pos <= list.size()) {
      const std::size_t comma = std::min(list.find(',', pos), list.size());
      const std::string item = trim(std::string_view(list).substr(pos, comma - pos));
      const std::string module = item.substr(0, item.find_first_of(" \t"));
      if (!module.empty() && denied_module(module)) {
        return {false, "import of module '" + module + "'"};
      }
      pos = comma + 1;
    }
  }

  static const std::regex call([] {
    std::string alternatives;
    for (const char* c : kDeniedCalls) {
      if (!alternatives.empty()) alternatives += '|';
      alternatives += c;
    }
    return std::regex(R"((^|[^\w.])()" + alternatives + R"()\s*\()");
  }());
  std::smatch m;
  if (std::regex_search(text, m, call)) return {false, "call to '" + m[2].str() + "'"};

  for (const char* attr : kDeniedAttributes) {
    if (text.find(attr) != std::string::npos) return {false, "attribute '" + std::string(attr) + "'"};
  }
  return {};
}

}  // namespace wrangle
