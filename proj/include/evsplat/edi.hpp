// Copyright Contributors to the evsplat Project
// SPDX-License-Identifier: Apache-2.0
//
// Event-based double integral deblurring. Recovers the sharp image at a
// reference time from one blurred exposure and the events recorded during it.

#pragma once

#include "evsplat/events.hpp"
#include "evsplat/geometry.hpp"
#include "evsplat/image.hpp"

namespace evsplat {

inline constexpr int kDefaultEdiBins = 32;

struct EdiRequest {
    RadianceImage blurred;
    EventStream   events;
    double        t_start = 0.0;
    double        t_end   = 1.0;
    double        t_ref   = 0.5;
    double        theta   = 0.2;
    int           bins    = kDefaultEdiBins;

    void validate() const;
};

/// Midpoint-rule inversion of the blur integral. The per-pixel factor comes
/// from luminance event counts and is shared by all colour channels.
RadianceImage edi_deblur(const EdiRequest &req);

/// edi_deblur at the exposure midpoint with the default bin count.
RadianceImage edi_mid_exposure(const RadianceImage &blurred, const EventStream &events,
                               const ExposureTrajectory &traj, const EventConfig &cfg);

} // namespace evsplat
