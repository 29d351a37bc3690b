# -*- coding: utf-8 -*-
"""
Plots of attack results: per-frame perturbation curves and perturbation frame grids

Overview
--------
Thin renderers over arrays already written to CSV/JSON by the harness, so any figure can be
regenerated from saved tables. Built on `matplotlib.pyplot`; the harness selects the
non-interactive Agg backend.

:func:`savefig` writes SVG files reproducibly: the SVG id salt is fixed and no creation
date is embedded, so re-rendering the same data gives byte-identical files.

Function list
-------------
Plot-generating functions
^^^^^^^^^^^^^^^^^^^^^^^^^
- plot_line_with_error_fill :   Plot 1d data as line(s) w/ transparent fill(s) to indicate errors
- plot_heatmap :                Plot 2d data as a heatmap (pseudocolor) plot
- plot_map_curves :             Plot per-frame MAP curve(s) of perturbation(s), marking polluted frames
- plot_perturbation_frames :    Plot grid of per-frame perturbation images, amplified for visibility

Plotting utilities
^^^^^^^^^^^^^^^^^^
- savefig :                     Save figure to file, reproducibly for SVG output
- plot_markers :                Plot set of markers (eg mask boundaries) on given axis

Function reference
------------------
"""
import os
import numpy as np
import matplotlib
import matplotlib.pyplot as plt

from matplotlib.axes import Axes
from matplotlib.lines import Line2D
from matplotlib.image import AxesImage
from matplotlib.patches import Polygon

from spavid.errors import ShapeError
from spavid.helpers import _merge_dicts

SVG_HASHSALT = 'spavid'

# Lambda returns list of all settable attributes of given plotting object
_settable_attributes = lambda obj: ['_'.join(attr.split('_')[1:]) for attr in dir(obj) \
                                    if attr.startswith('set_')]

AXES_PARAMS = _settable_attributes(Axes)
PLOT_PARAMS = ['scalex', 'scaley'] + _settable_attributes(Line2D)
FILL_PARAMS = _settable_attributes(Polygon)
IMSHOW_PARAMS = ['aspect','origin'] + _settable_attributes(AxesImage)


# =============================================================================
# Functions to generate specific plot types
# =============================================================================
def plot_line_with_error_fill(x, data, err=None, ax=None, color=None, events=None, **kwargs):
    """
    Plot 1d data as line plot(s) +/- error(s) as semi-transparent fill(s) in given axis

    Uses :func:`plt.plot` and :func:`plt.fill`

    Parameters
    ----------
    x : array-like, shape=(n,)
        x-axis sampling vector (eg frame numbers) for both `data` and `err`

    data : array-like, shape=(n,) or (n_lines,n)
        Values to plot as line(s). Each row of a 2d array is plotted as a separate line.

    err : array-like, shape=(n,) or (n_lines,n) or (2*n_lines,n), default: (no error fills)
        Error values (eg SEMs across clips) to plot as fill around line(s).
        (n,) or (n_lines,n) errors are 1-sided: data +/- err.
        (2*n_lines,n) errors are 2-sided [upper; lower] ranges, odd rows = upper, even = lower.

    color : Color spec or (n_lines,) of Color specs, default: (standard matplotlib color order)
        Color of each line and its error fill

    events : callable or array-like, shape=(n_events,)
        Event values to plot as markers on x-axis (see :func:`plot_markers`),
        -or- callable that plots the markers itself

    **kwargs
        Parameters of :func:`plt.axes`, :func:`plt.plot`, or :func:`plt.fill`, passed to the
        proper function. Custom defaults: linewidth=1.5, alpha=0.25 (of fills).

    Returns
    -------
    lines : list of Line2D objects
    patches : list of Polygon objects
    ax : Axis object
    """
    x = np.asarray(x)
    data = np.asarray(data)
    if data.ndim == 1: data = data[np.newaxis,:]
    n_lines = data.shape[0]

    assert data.ndim == 2, \
        ValueError("data must be 1-d (or 2-d for multiple lines) (%d-d data given)" % data.ndim)
    assert data.shape[1] == len(x), \
        ValueError("data (%d) and x (%d) should have same length" % (data.shape[1],len(x)))

    if err is not None:
        err = np.asarray(err)
        if err.ndim == 1: err = err[np.newaxis,:]

        assert err.shape[1] == len(x), \
            ValueError("err.shape[1] (%d) and x (%d) should have same length" % (err.shape[1],len(x)))
        assert err.shape[0] in [n_lines,2*n_lines], \
            ValueError("err must be input as (n,) vector or (2*n_lines,n) array of upper;lower errors")

        if err.shape[0] == n_lines: upper, lower = data+err, data-err
        else:                       upper, lower = err[0::2,:], err[1::2,:]

        ylim = (lower.min(), upper.max())

    else:
        ylim = (data.min(), data.max())

    # Default ylim to data range +/- 5% (nonzero span for flat data, eg all-zero MAP)
    span = (ylim[1] - ylim[0]) if ylim[1] > ylim[0] else 1.0
    ylim = (ylim[0]-0.05*span, ylim[1]+0.05*span)
    xlim = (x.min(),x.max()) if x.max() > x.min() else (x.min()-0.5, x.max()+0.5)

    if ax is None: ax = plt.gca()

    axes_args, plot_args, fill_args = _hash_kwargs(kwargs, [AXES_PARAMS, PLOT_PARAMS, FILL_PARAMS])
    axes_args = _merge_dicts(dict(xlim=xlim, ylim=ylim), axes_args)
    plot_args = _merge_dicts(dict(linewidth=1.5), plot_args)
    fill_args = _merge_dicts(dict(alpha=0.25), fill_args)

    color = _set_plot_colors(color, n_lines)

    ax.set(**axes_args)

    if events is not None:
        if callable(events):    events()
        else:                   plot_markers(events, axis='x', ax=ax,
                                             xlim=axes_args['xlim'], ylim=axes_args['ylim'])

    lines = []
    patches = []
    for j in range(n_lines):
        if err is not None:
            patch = ax.fill(np.hstack((x,np.flip(x))),
                            np.hstack((upper[j,:], np.flip(lower[j,:]))),
                            facecolor=color[j], **fill_args)
            patches.append(patch)

        line = ax.plot(x, data[j,:], '-', color=color[j], **plot_args)
        lines.append(line)

    return lines, patches, ax


def plot_heatmap(x, y, data, ax=None, clim=None, events=None, **kwargs):
    """
    Plot 2D data as a heatmap (aka pseudocolor) plot in given axis

    Uses :func:`plt.imshow`

    Parameters
    ----------
    x : array-like, shape=(n_x,)
        Sampling vector for data dimension plotted along x-axis

    y : array-like, shape=(n_y,)
        Sampling vector for data dimension plotted along y-axis

    data : ndarray, shape=(n_y,n_x)
        Data to plot on color axis

    ax : Pyplot Axis object, default: plt.gca() (current axis)

    clim : array-like, shape=(2,), default: (data.min(),data.max())
        [low,high] limits of color axis

    events : callable or array-like, shape=(n_events,)
        Event values to plot as markers on x-axis (see :func:`plot_markers`)

    **kwargs
        Parameters of :func:`plt.axes` or :func:`plt.imshow`. Custom defaults:
        cmap='viridis', origin='lower', aspect='auto', interpolation='none'.

    Returns
    -------
    img : AxesImage object
    ax : Axis object
    """
    x = np.asarray(x)
    y = np.asarray(y)
    data = np.asarray(data)

    assert data.ndim == 2, ValueError("data must be 2-dimensional (%d-d data given)" % data.ndim)
    assert data.shape == (len(y),len(x)), \
        ValueError("data (%d,%d) must have dimensions (len(y),len(x)) = (%d,%d)" \
                    % (*data.shape,len(y),len(x)))

    if ax is None: ax = plt.gca()
    if clim is None: clim = (data.min(), data.max())
    if clim[1] <= clim[0]: clim = (clim[0], clim[0] + 1.0)

    # Plot extent = full sampling range +/- 1/2 sampling interval, so edge cells are whole
    dx = np.diff(x).mean() if len(x) > 1 else 1
    dy = np.diff(y).mean() if len(y) > 1 else 1
    xlim = [x[0]-dx/2, x[-1]+dx/2]
    ylim = [y[0]-dy/2, y[-1]+dy/2]

    axes_args, imshow_args = _hash_kwargs(kwargs, [AXES_PARAMS, IMSHOW_PARAMS])
    axes_args = _merge_dicts(dict(xlim=xlim, ylim=ylim), axes_args)
    imshow_args = _merge_dicts(dict(extent=[*xlim,*ylim], vmin=clim[0], vmax=clim[1],
                                    cmap='viridis', origin='lower', aspect='auto',
                                    interpolation='none'), imshow_args)

    img = ax.imshow(data, **imshow_args)

    ax.set(**axes_args)

    if events is not None:
        if callable(events):    events()
        else:                   plot_markers(events, axis='x', ax=ax,
                                             xlim=axes_args['xlim'], ylim=axes_args['ylim'])

    return img, ax


def plot_map_curves(frame_maps, labels=None, polluted=None, ax=None, color=None, **kwargs):
    """
    Plot per-frame MAP curve(s) of one or more perturbations of the same clip length

    Frames are numbered from 1. Each curve is drawn with star markers at each frame.

    Parameters
    ----------
    frame_maps : array-like, shape=(T,) or (n_curves,T)
        Per-frame mean absolute perturbation (eg from :func:`spavid.metrics.per_frame_map`),
        one row per curve (eg l2,1 and l2 attacks of the same clip)

    labels : list of str, shape=(n_curves,), optional
        Legend label for each curve

    polluted : int, optional
        Number of leading frames allowed to carry perturbation (prefix mask). If given,
        the boundary of the polluted range is marked with a vertical line.

    ax : Pyplot Axis object, default: plt.gca() (current axis)

    color : Color spec or (n_curves,) of Color specs, default: (standard matplotlib color order)

    **kwargs
        Any other keyword args passed to :func:`plot_line_with_error_fill`

    Returns
    -------
    lines : list of Line2D objects
    ax : Axis object
    """
    frame_maps = np.atleast_2d(np.asarray(frame_maps, dtype=float))
    if frame_maps.ndim != 2:
        raise ShapeError("frame_maps must be (T,) or (n_curves,T)", frame_maps.shape)
    n_curves, n_frames = frame_maps.shape
    if labels is not None:
        assert len(labels) == n_curves, \
            ValueError("Need one label per curve (%d labels, %d curves)" % (len(labels),n_curves))

    frames = np.arange(1, n_frames+1)
    events = None if polluted is None else [polluted + 0.5]
    kwargs = _merge_dicts(dict(marker='*', xlabel='Frame', ylabel='MAP'), kwargs)

    lines, _, ax = plot_line_with_error_fill(frames, frame_maps, ax=ax, color=color,
                                             events=events, **kwargs)
    if labels is not None:
        ax.legend([line[0] for line in lines], labels, frameon=False)

    return lines, ax


def plot_perturbation_frames(perturbation, frames=None, channel=0, scale=255.0, n_cols=8,
                             fig=None, cmap='RdBu_r', clim=None):
    """
    Plot grid of perturbation frame images, one panel per frame

    Values are multiplied by `scale` (by default expressing them in 0-255 pixel units), and
    all panels share one symmetric color range, so frames without perturbation are blank.

    Parameters
    ----------
    perturbation : array-like, shape=(T,W,H,C)
        Perturbation E of one clip

    frames : array-like of int, default: all frames
        Indexes of frames to plot

    channel : int, default: 0
        Channel to plot

    scale : float, default: 255.0
        Amplification applied to perturbation values

    n_cols : int, default: 8
        Number of panel columns

    fig : Pyplot Figure object, default: new figure

    cmap : str, default: 'RdBu_r'
        Diverging colormap

    clim : array-like, shape=(2,), default: +/- max absolute scaled value

    Returns
    -------
    fig : Figure object
    axs : ndarray of Axis objects, shape=(n_rows,n_cols)
    """
    E = np.asarray(perturbation, dtype=float)
    if E.ndim != 4:
        raise ShapeError("perturbation must be (T,W,H,C)", E.shape)
    assert 0 <= channel < E.shape[3], \
        ValueError("channel must be in range 0-%d, got %d" % (E.shape[3]-1, channel))
    if frames is None: frames = np.arange(E.shape[0])
    frames = np.atleast_1d(frames)

    images = scale*E[frames,:,:,channel]
    if clim is None:
        lim = np.abs(images).max()
        if lim == 0: lim = 1.0
        clim = (-lim, lim)

    n_cols = min(n_cols, len(frames))
    n_rows = int(np.ceil(len(frames)/n_cols))
    if fig is None: fig = plt.figure()
    axs = np.atleast_2d(fig.subplots(n_rows, n_cols, squeeze=False))

    for i_panel,ax in enumerate(axs.flat):
        if i_panel >= len(frames):
            ax.set_axis_off()
            continue
        W, H = images.shape[1:3]
        # Image rows are y, columns are x
        plot_heatmap(np.arange(W), np.arange(H), images[i_panel].T, ax=ax, clim=clim,
                     cmap=cmap, origin='upper')
        ax.set_title('%d' % (frames[i_panel]+1), fontsize=8)
        ax.set_xticks([])
        ax.set_yticks([])

    return fig, axs


# =============================================================================
# Plotting utilities
# =============================================================================
def savefig(filename, fig=None, figsize=(11.0,8.5), dpi=100, makedir=True, **kwargs):
    """
    Save figure to file, generating target directory if missing

    Wrapper around fig.savefig(). SVG output (the default format) is written with a fixed
    element-id salt and without date metadata, so identical figures give identical bytes.

    Parameters
    ----------
    filename : str
        Full-path filename to save figure into. If no file extension is included,
        .svg is added.

    fig : Pyplot Figure object, default: plt.gcf()

    figsize : 2-tuple of float, default: (11.0,8.5)
        Figure dimension (width, height) in inches

    dpi : float, default: 100
        Resolution of saved figure in dots per inch (raster formats only)

    makedir : bool, default: True
        If True, creates requested directory to save figure into if missing
    """
    if fig is None: fig = plt.gcf()

    path, file = os.path.split(filename)
    if path and not os.path.exists(path):
        if makedir:
            os.makedirs(path)
        else:
            raise RuntimeError("Directory '%s does not exist. "
                               "Please make it or set `makedir`=True." % path)

    _, ext = os.path.splitext(file)
    if ext == '':
        filename = filename + '.svg'
        ext = '.svg'

    fig.set_size_inches(figsize, forward=False)
    if ext.lower() == '.svg':
        kwargs = _merge_dicts(dict(metadata={'Date': None}), kwargs)
        with matplotlib.rc_context({'svg.hashsalt': SVG_HASHSALT}):
            fig.savefig(filename, dpi=dpi, **kwargs)
    else:
        fig.savefig(filename, dpi=dpi, **kwargs)


def plot_markers(values, axis='x', ax=None, xlim=None, ylim=None,
                 linecolor=[0.50,0.50,0.50], linewidth=0.5,
                 fillcolor=[0.50,0.50,0.50], fillalpha=0.2):
    """
    Plot set of markers on given axis (eg boundary between polluted and clean frames)

    Scalar values are plotted as single lines; (start,end) 2-tuples as filled rectangles
    (eg a range of polluted frames). All markers extend the full length of the opposing axis.
    If limits are explicitly input for the marker axis, markers fully outside them are skipped.

    Parameters
    ----------
    values : array-like, shape=(n_events,), dtype=scalars and/or 2-tuples
        Marker values

    axis : {'x','y'}, default: 'x'
        Which axis to plot markers on

    Returns
    -------
    ax : Axis object
    handles : List of Line2D or Polygon objects
        plt.plot/fill outputs for each marker plotted, in the same order as input
    """
    if isinstance(values,(float,int)): values = [values]
    xlim_input = xlim is not None
    ylim_input = ylim is not None
    if ax is None: ax = plt.gca()
    if xlim is None: xlim = ax.get_xlim()
    if ylim is None: ylim = ax.get_ylim()

    axis = axis.lower()
    assert axis in ['x','y'], ValueError("axis must be 'x'|'y'")

    handles = []
    for value in values:
        value = np.atleast_1d(value)
        if value.shape[0] == 0: continue

        if (axis == 'x') and xlim_input:
            if (value < xlim[0]).all() or (value > xlim[1]).all(): continue
        elif (axis == 'y') and ylim_input:
            if (value < ylim[0]).all() or (value > ylim[1]).all(): continue

        if len(value) == 1:
            if axis == 'x':
                handle = ax.plot([value[0]]*2, ylim, '-', color=linecolor, linewidth=linewidth)
            else:
                handle = ax.plot(xlim, [value[0]]*2, '-', color=linecolor, linewidth=linewidth)
        elif len(value) == 2:
            if axis == 'x':
                handle = ax.fill([value[0],value[0],value[1],value[1]],
                                 [ylim[0],ylim[1],ylim[1],ylim[0]],
                                 color=fillcolor, edgecolor=None, alpha=fillalpha)
            else:
                handle = ax.fill([xlim[0],xlim[1],xlim[1],xlim[0]],
                                 [value[0],value[0],value[1],value[1]],
                                 color=fillcolor, edgecolor=None, alpha=fillalpha)
        else:
            raise ValueError("Each value in values must be scalar|2-tuple (not len=%d)"
                             % len(value))

        handles.append(handle)

    return ax, handles


# =============================================================================
# Helper functions
# =============================================================================
def _hash_kwargs(args_dict, attr_lists):
    """
    Sort keyword args of a plotting function to the plot objects (Axes, Line2D, etc.)
    they are attributes of. Returns one dict per list in `attr_lists`.

    Any keyword arg not matched to any attribute list raises an AttributeError.
    """
    hashed_attrs = [{} for _ in range(len(attr_lists))]

    for key,value in args_dict.items():
        for i_list,attr_list in enumerate(attr_lists):
            if key in attr_list:
                hashed_attrs[i_list].update({key:value})
                break
        else:
            raise AttributeError("Incorrect or misspelled variable in keyword args: %s" % key)

    return tuple(hashed_attrs)


def _set_plot_colors(color, n_plot_objects):
    """ Set plotting colors, including defaults and expanding colors to # of plot objects """
    if color is None:
        color = ['C'+str(j) for j in range(n_plot_objects)]

    else:
        color = np.atleast_1d(color)
        # Enclose a lone RGB triplet in an outer array
        if ((len(color) == 3) and (n_plot_objects != 3)): color = [color]

        if (len(color) == 1) and (n_plot_objects != 1):
            color = np.tile(color, (n_plot_objects,))
        else:
            assert len(color) == n_plot_objects, \
                ValueError("Color must have one value per plot obect (line/fill/etc)" \
                           " or a single value that is used for all plot objects" \
                           " (%d colors/%d objects)" % (len(color),n_plot_objects))

    return color
