/*
 * Copyright 2026 The mmpc Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace mmpc {

/// Dense row-major matrix indexed [cell][slot].
template <typename T>
class CellSlotGrid {
public:
    CellSlotGrid() = default;
    CellSlotGrid(int cells, int slots, T fill = T{})
        : cells_(cells), slots_(slots),
          data_(static_cast<std::size_t>(cells) * static_cast<std::size_t>(slots), fill) {}

    int cells() const noexcept { return cells_; }
    int slots() const noexcept { return slots_; }
    std::size_t size() const noexcept { return data_.size(); }

    T& operator()(int cell, int slot) {
        assert(cell >= 0 && cell < cells_ && slot >= 0 && slot < slots_);
        return data_[index(cell, slot)];
    }
    const T& operator()(int cell, int slot) const {
        assert(cell >= 0 && cell < cells_ && slot >= 0 && slot < slots_);
        return data_[index(cell, slot)];
    }

    std::span<T> flat() noexcept { return data_; }
    std::span<const T> flat() const noexcept { return data_; }

    bool operator==(const CellSlotGrid&) const = default;

private:
    std::size_t index(int cell, int slot) const noexcept {
        return static_cast<std::size_t>(cell) * static_cast<std::size_t>(slots_) +
               static_cast<std::size_t>(slot);
    }

    int cells_ = 0;
    int slots_ = 0;
    std::vector<T> data_;
};

using SlotMatrix = CellSlotGrid<double>;
using ActivityMask = CellSlotGrid<unsigned char>;

/// Large-scale fading gains indexed [bs_cell][user_cell][slot].
///
/// at(l, i, t) is the gain from user t of cell i to the base station of cell l.
class GainTensor {
public:
    GainTensor() = default;
    GainTensor(int cells, int slots)
        : cells_(cells), slots_(slots),
          data_(static_cast<std::size_t>(cells) * static_cast<std::size_t>(cells) *
                    static_cast<std::size_t>(slots),
                0.0) {}

    int cells() const noexcept { return cells_; }
    int slots() const noexcept { return slots_; }

    double& at(int bs, int cell, int slot) {
        assert(in_range(bs, cell, slot));
        return data_[index(bs, cell, slot)];
    }
    double at(int bs, int cell, int slot) const {
        assert(in_range(bs, cell, slot));
        return data_[index(bs, cell, slot)];
    }

    std::span<double> flat() noexcept { return data_; }
    std::span<const double> flat() const noexcept { return data_; }

    bool operator==(const GainTensor&) const = default;

private:
    bool in_range(int bs, int cell, int slot) const noexcept {
        return bs >= 0 && bs < cells_ && cell >= 0 && cell < cells_ && slot >= 0 &&
               slot < slots_;
    }
    std::size_t index(int bs, int cell, int slot) const noexcept {
        return (static_cast<std::size_t>(bs) * static_cast<std::size_t>(cells_) +
                static_cast<std::size_t>(cell)) *
                   static_cast<std::size_t>(slots_) +
               static_cast<std::size_t>(slot);
    }

    int cells_ = 0;
    int slots_ = 0;
    std::vector<double> data_;
};

}  // namespace mmpc
