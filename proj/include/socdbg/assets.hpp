#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

// Data files from data/ compiled into the library.
namespace socdbg::assets {

std::optional<std::string_view> find(std::string_view name);
std::string_view get(std::string_view name);

}  // namespace socdbg::assets
