#include "ionreadout/labels.hpp"

#include <stdexcept>

namespace ionreadout {

std::size_t num_classes(int n_ions)
{
    if (n_ions < 1 || n_ions > kMaxIons) {
        throw std::invalid_argument("number of ions must be in [1, " + std::to_string(kMaxIons) +
                                    "], got " + std::to_string(n_ions));
    }
    return std::size_t{1} << n_ions;
}

std::string label_from_index(std::size_t index, int n_ions)
{
    if (index >= num_classes(n_ions)) {
        throw std::out_of_range("class index " + std::to_string(index) + " out of range");
    }
    std::string label(static_cast<std::size_t>(n_ions), '0');
    for (int ion = 0; ion < n_ions; ++ion) {
        if (ion_bit(index, ion, n_ions)) {
            label[static_cast<std::size_t>(ion)] = '1';
        }
    }
    return label;
}

std::size_t index_from_label(std::string_view label)
{
    if (label.empty() || label.size() > static_cast<std::size_t>(kMaxIons)) {
        throw std::invalid_argument("label length must be in [1, 12]: '" + std::string(label) + "'");
    }
    std::size_t index = 0;
    for (char c : label) {
        if (c != '0' && c != '1') {
            throw std::invalid_argument("label must contain only '0'/'1': '" + std::string(label) + "'");
        }
        index = (index << 1U) | static_cast<std::size_t>(c == '1');
    }
    return index;
}

}  // namespace ionreadout
